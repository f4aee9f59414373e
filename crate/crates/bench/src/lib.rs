//! Deterministic inputs shared by the benchmarks.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tard_core::models::AutoencoderModel;
use tard_core::netcore::Matrix;

pub const SENSORS: usize = 8;
pub const CONTROLS: usize = 4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smooth, non-constant values so batch statistics stay well conditioned.
pub fn matrix(rows: usize, cols: usize, phase: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|v| (v as f64 * 0.37 + phase).sin() + 0.1 * (v % 7) as f64)
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized to fit")
}

/// An untrained autoencoder over the default sensor and control counts.
pub fn autoencoder(seed: u64) -> AutoencoderModel {
    AutoencoderModel::new(SENSORS, CONTROLS, &mut rng(seed))
}

/// Alternating healthy and faulty stretches of `len` rows.
pub fn truth(rows: usize, len: usize) -> Vec<u8> {
    (0..rows).map(|i| ((i / len) % 2) as u8).collect()
}

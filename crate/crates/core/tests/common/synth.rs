//! Small synthetic systems for the training tests.

use tard_core::data::{
    generate_synthetic, DriftSchedule, SampleBatch, SensorShift, Standardizer, SynthConfig,
};

pub fn config(seed: u64, n: usize, shift: &[(usize, f64, f64)]) -> SynthConfig {
    SynthConfig {
        seed,
        system_seed: 7,
        n_controls: 3,
        n_sensors: 6,
        n_samples: n,
        rate_hz: 1.0,
        // short segments so a few thousand rows cover the control space densely
        schedule: DriftSchedule {
            segment_len: 25,
            ramp_len: 5,
            ..DriftSchedule::default()
        },
        noise_sigma: 0.02,
        shift: shift
            .iter()
            .map(|&(sensor, offset, gain)| SensorShift {
                sensor,
                offset,
                gain,
            })
            .collect(),
        fault: None,
    }
}

pub fn raw(seed: u64, n: usize, shift: &[(usize, f64, f64)]) -> SampleBatch {
    generate_synthetic(&config(seed, n, shift))
        .unwrap()
        .series
        .batch
}

/// Source rows, a standardizer fitted on them, and the standardized rows.
pub fn source(seed: u64, n: usize) -> (SampleBatch, Standardizer, SampleBatch) {
    let raw = raw(seed, n, &[]);
    let st = Standardizer::fit(&raw.values, "source");
    let std = st.transform_batch(&raw).unwrap();
    (raw, st, std)
}

/// Mean absolute difference over all entries.
pub fn mean_abs(a: &tard_core::netcore::Matrix, b: &tard_core::netcore::Matrix) -> f64 {
    let d = a.sub(b).unwrap();
    d.as_slice().iter().map(|v| v.abs()).sum::<f64>() / d.as_slice().len() as f64
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::SampleBatch;
use crate::error::{Error, Result};
use crate::netcore::{BatchNorm, BnMode, Dense, Layer, Matrix, Network, Tape};

/// Encoder widths after each dense layer.
pub const ENCODER_WIDTHS: [usize; 3] = [50, 50, 10];
/// Decoder hidden widths; the last decoder layer maps to the sensor count.
pub const DECODER_HIDDEN: [usize; 2] = [50, 50];
pub const LATENT_DIM: usize = 10;

/// Reconstruction network `f_θ`: `[x, w]` in, sensor predictions `x̂` out.
///
/// Encoder: three dense layers each followed by batch normalization and ReLU.
/// Decoder: three dense layers, ReLU between the hidden ones, linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub encoder: Network,
    pub decoder: Network,
}

/// Recorded forward pass through both halves.
pub struct AeTrace {
    pub latent: Matrix,
    pub output: Matrix,
    pub encoder_tape: Tape,
    pub decoder_tape: Tape,
}

impl AutoencoderModel {
    pub fn new<R: Rng + ?Sized>(sensor_dim: usize, control_dim: usize, rng: &mut R) -> Self {
        let mut enc = Vec::new();
        let mut prev = sensor_dim + control_dim;
        for &w in &ENCODER_WIDTHS {
            enc.push(Layer::Dense(Dense::init(prev, w, rng)));
            enc.push(Layer::BatchNorm(BatchNorm::new(w)));
            enc.push(Layer::Relu);
            prev = w;
        }
        let mut dec = Vec::new();
        for &w in &DECODER_HIDDEN {
            dec.push(Layer::Dense(Dense::init(prev, w, rng)));
            dec.push(Layer::Relu);
            prev = w;
        }
        dec.push(Layer::Dense(Dense::init(prev, sensor_dim, rng)));
        AutoencoderModel {
            encoder: Network::new(enc),
            decoder: Network::new(dec),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.in_dim().unwrap_or(0)
    }

    pub fn sensor_dim(&self) -> usize {
        self.decoder.out_dim().unwrap_or(0)
    }

    pub fn control_dim(&self) -> usize {
        self.input_dim() - self.sensor_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.out_dim().unwrap_or(0)
    }

    pub fn set_bn_mode(&mut self, mode: BnMode) {
        self.encoder.set_bn_mode(mode);
        self.decoder.set_bn_mode(mode);
    }

    /// Predicts from a ready-made `[x, w]` matrix.
    pub fn predict_input(&mut self, input: &Matrix) -> Result<Matrix> {
        let latent = self.encoder.forward(input)?;
        self.decoder.forward(&latent)
    }

    pub fn encode(&mut self, input: &Matrix) -> Result<Matrix> {
        self.encoder.forward(input)
    }

    pub fn forward_recorded(&mut self, input: &Matrix) -> Result<AeTrace> {
        let (latent, encoder_tape) = self.encoder.forward_recorded(input)?;
        let (output, decoder_tape) = self.decoder.forward_recorded(&latent)?;
        Ok(AeTrace {
            latent,
            output,
            encoder_tape,
            decoder_tape,
        })
    }

    pub fn check_batch(&self, batch: &SampleBatch) -> Result<()> {
        if batch.schema.sensor_dim() != self.sensor_dim() {
            return Err(Error::dim(
                "autoencoder sensor count",
                self.sensor_dim(),
                batch.schema.sensor_dim(),
            ));
        }
        if batch.schema.control_dim() != self.control_dim() {
            return Err(Error::dim(
                "autoencoder control count",
                self.control_dim(),
                batch.schema.control_dim(),
            ));
        }
        Ok(())
    }

    pub fn checksum(&self) -> u64 {
        self.encoder.checksum().rotate_left(17) ^ self.decoder.checksum()
    }
}

/// Sensor predictions `x̂` for a (standardized) batch. Batch-norm modes are
/// whatever the caller left them in.
pub fn ae_predict(batch: &SampleBatch, model: &mut AutoencoderModel) -> Result<Matrix> {
    model.check_batch(batch)?;
    model.predict_input(&batch.model_input())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSchema, Role};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(rows: usize) -> SampleBatch {
        let schema = FeatureSchema::from_roles(&[
            ("w0", Role::Control),
            ("x0", Role::Sensor),
            ("w1", Role::Control),
            ("x1", Role::Sensor),
            ("x2", Role::Sensor),
        ])
        .unwrap();
        let data = (0..rows * 5)
            .map(|i| ((i * 7) % 11) as f64 / 5.0 - 1.0)
            .collect();
        SampleBatch::new(Matrix::from_vec(rows, 5, data).unwrap(), schema).unwrap()
    }

    #[test]
    fn output_is_sensor_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ae = AutoencoderModel::new(3, 2, &mut rng);
        assert_eq!(ae.input_dim(), 5);
        assert_eq!(ae.latent_dim(), LATENT_DIM);
        let out = ae_predict(&batch(6), &mut ae).unwrap();
        assert_eq!(out.shape(), (6, 3));
        assert!(out.is_finite());
    }

    #[test]
    fn eval_mode_is_row_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ae = AutoencoderModel::new(3, 2, &mut rng);
        ae.set_bn_mode(BnMode::Eval);
        let b = batch(1);
        let twice = SampleBatch::concat(&[&b, &b]).unwrap();
        let out = ae_predict(&twice, &mut ae).unwrap();
        assert_eq!(out.row(0), out.row(1));
    }

    #[test]
    fn rejects_mismatched_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ae = AutoencoderModel::new(2, 3, &mut rng);
        assert!(matches!(
            ae_predict(&batch(4), &mut ae),
            Err(Error::Dimension { .. })
        ));
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::autoencoder::{ae_predict, AutoencoderModel};
use super::bundle::ModelBundle;
use crate::data::SampleBatch;
use crate::error::{Error, Result};
use crate::netcore::{BatchNorm, BnMode, Dense, Layer, Matrix, Network, Tape};

pub const ADAPTIVE_HIDDEN: usize = 10;
/// Factor applied to the output layer's initial weights, so an untrained
/// module adds a near-zero correction.
pub const OUTPUT_INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    /// Δx ≥ 0 elementwise.
    #[default]
    Relu,
    Linear,
}

/// Correction network `h_φ`: control variables in, sensor-width Δx out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveModule {
    pub net: Network,
    pub output: OutputActivation,
}

impl AdaptiveModule {
    pub fn new<R: Rng + ?Sized>(
        control_dim: usize,
        sensor_dim: usize,
        output: OutputActivation,
        rng: &mut R,
    ) -> Self {
        let mut layers = vec![
            Layer::Dense(Dense::init(control_dim, ADAPTIVE_HIDDEN, rng)),
            Layer::BatchNorm(BatchNorm::new(ADAPTIVE_HIDDEN)),
            Layer::Relu,
            Layer::Dense(Dense::init(ADAPTIVE_HIDDEN, sensor_dim, rng)),
        ];
        if let Some(Layer::Dense(d)) = layers.last_mut() {
            d.weight = d.weight.scale(OUTPUT_INIT_SCALE);
        }
        if output == OutputActivation::Relu {
            layers.push(Layer::Relu);
        }
        AdaptiveModule {
            net: Network::new(layers),
            output,
        }
    }

    /// Sets the output bias so the correction starts near the constant
    /// `delta`, clamped at zero for the ReLU output.
    pub fn start_from_constant(&mut self, delta: &[f64]) {
        let relu = self.output == OutputActivation::Relu;
        let dense = self
            .net
            .layers
            .iter_mut()
            .rev()
            .find_map(|l| match l {
                Layer::Dense(d) => Some(d),
                _ => None,
            })
            .expect("module ends in a dense layer");
        for (b, &d) in dense.bias.iter_mut().zip(delta) {
            *b = if relu { d.max(0.0) } else { d };
        }
    }

    /// All dense weights and biases zero; the correction is identically zero.
    pub fn zeroed(control_dim: usize, sensor_dim: usize, output: OutputActivation) -> Self {
        let mut layers = vec![
            Layer::Dense(Dense::zeros(control_dim, ADAPTIVE_HIDDEN)),
            Layer::BatchNorm(BatchNorm::new(ADAPTIVE_HIDDEN)),
            Layer::Relu,
            Layer::Dense(Dense::zeros(ADAPTIVE_HIDDEN, sensor_dim)),
        ];
        if output == OutputActivation::Relu {
            layers.push(Layer::Relu);
        }
        AdaptiveModule {
            net: Network::new(layers),
            output,
        }
    }

    pub fn control_dim(&self) -> usize {
        self.net.in_dim().unwrap_or(0)
    }

    pub fn sensor_dim(&self) -> usize {
        self.net.out_dim().unwrap_or(0)
    }

    pub fn set_bn_mode(&mut self, mode: BnMode) {
        self.net.set_bn_mode(mode);
    }

    /// Δx for a block of (standardized) control rows.
    pub fn correction(&mut self, controls: &Matrix) -> Result<Matrix> {
        if controls.cols() != self.control_dim() {
            return Err(Error::dim(
                "adaptive module input",
                self.control_dim(),
                controls.cols(),
            ));
        }
        self.net.forward(controls)
    }

    pub fn correction_recorded(&mut self, controls: &Matrix) -> Result<(Matrix, Tape)> {
        if controls.cols() != self.control_dim() {
            return Err(Error::dim(
                "adaptive module input",
                self.control_dim(),
                controls.cols(),
            ));
        }
        self.net.forward_recorded(controls)
    }

    pub fn checksum(&self) -> u64 {
        self.net.checksum()
    }
}

/// `x̂ + Δx` with the bundle's networks in whatever BN modes they are in.
pub fn corrected_predict(batch: &SampleBatch, bundle: &mut ModelBundle) -> Result<Matrix> {
    let ModelBundle { ae, adaptive, .. } = bundle;
    let adaptive = adaptive.as_mut().ok_or_else(|| {
        Error::Usage("bundle has no adaptive module; run adaptation first".into())
    })?;
    corrected_predict_parts(batch, ae, adaptive)
}

pub fn corrected_predict_parts(
    batch: &SampleBatch,
    ae: &mut AutoencoderModel,
    adaptive: &mut AdaptiveModule,
) -> Result<Matrix> {
    let base = ae_predict(batch, ae)?;
    let delta = adaptive.correction(&batch.controls())?;
    base.add(&delta)
}

//! Seeded multiphase-style process generator used by the oracle tests and
//! the synthetic benchmark.
//!
//! Control channels follow piecewise setpoints joined by linear ramps, with
//! AR(1) jitter on top. Each sensor is a fixed nonlinear function of the
//! controls (linear mixing plus a saturating `tanh` term around a positive
//! baseline) plus white noise. The sensor map depends only on `system_seed`,
//! so source and target streams of the same system share physics while
//! `seed` varies schedules and noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::schema::{FeatureSchema, LabeledSeries, Role, SampleBatch};
use crate::error::{Error, Result};
use crate::netcore::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Offset,
    Drift,
    Stuck,
    Oscillation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub sensor: usize,
    pub amplitude: f64,
    pub start: usize,
    pub duration: usize,
    /// Period in samples for `oscillation`.
    #[serde(default = "default_period")]
    pub period: usize,
}

fn default_period() -> usize {
    20
}

/// `x ← gain·x + offset` on one sensor of the target system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorShift {
    pub sensor: usize,
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "unit")]
    pub gain: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSchedule {
    /// Setpoints are drawn uniformly from `[low, high]` per control channel
    /// unless `setpoints` lists them explicitly.
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub setpoints: Vec<Vec<f64>>,
    /// Visit explicit setpoints in random order (never repeating the previous
    /// one) instead of cycling through them.
    #[serde(default)]
    pub random_order: bool,
    pub segment_len: usize,
    pub ramp_len: usize,
    /// Stationary standard deviation of the AR(1) jitter on each control.
    pub jitter: f64,
}

impl Default for DriftSchedule {
    fn default() -> Self {
        DriftSchedule {
            low: 0.0,
            high: 1.0,
            setpoints: Vec::new(),
            random_order: false,
            segment_len: 300,
            ramp_len: 60,
            jitter: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub system_seed: u64,
    pub n_controls: usize,
    pub n_sensors: usize,
    pub n_samples: usize,
    #[serde(default = "unit")]
    pub rate_hz: f64,
    #[serde(default)]
    pub schedule: DriftSchedule,
    /// Sensor noise standard deviation, raw units.
    pub noise_sigma: f64,
    #[serde(default)]
    pub shift: Vec<SensorShift>,
    #[serde(default)]
    pub fault: Option<FaultSpec>,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_controls == 0 || self.n_sensors == 0 || self.n_samples == 0 {
            return Err(Error::Config(
                "synthetic dimensions must be positive".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        if !(self.rate_hz > 0.0) {
            return Err(Error::Config("rate_hz must be positive".into()));
        }
        let s = &self.schedule;
        if s.segment_len == 0 || !(s.high >= s.low) || !(s.jitter >= 0.0) {
            return Err(Error::Config("invalid drift schedule".into()));
        }
        if let Some(p) = s.setpoints.iter().find(|p| p.len() != self.n_controls) {
            return Err(Error::dim("explicit setpoint", self.n_controls, p.len()));
        }
        for sh in &self.shift {
            if sh.sensor >= self.n_sensors {
                return Err(Error::Config(format!(
                    "shift on unknown sensor {}",
                    sh.sensor
                )));
            }
        }
        if let Some(f) = &self.fault {
            if f.sensor >= self.n_sensors {
                return Err(Error::Config(format!(
                    "fault on unknown sensor {}",
                    f.sensor
                )));
            }
            if f.duration == 0 || f.start + f.duration > self.n_samples {
                return Err(Error::Config(format!(
                    "fault window {}..{} outside series of {} samples",
                    f.start,
                    f.start + f.duration,
                    self.n_samples
                )));
            }
            if f.kind == FaultKind::Oscillation && f.period == 0 {
                return Err(Error::Config("oscillation period must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> FeatureSchema {
        let mut columns: Vec<(String, Role)> = (0..self.n_controls)
            .map(|i| (format!("w{i}"), Role::Control))
            .collect();
        columns.extend((0..self.n_sensors).map(|j| (format!("x{j}"), Role::Sensor)));
        FeatureSchema::from_roles(&columns).expect("synthetic schema is well formed")
    }
}

/// The fixed control→sensor response of one synthetic system.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorMap {
    base: Vec<f64>,
    linear: Vec<Vec<f64>>,
    sat_gain: Vec<f64>,
    sat_mix: Vec<Vec<f64>>,
    sat_bias: Vec<f64>,
}

impl SensorMap {
    pub fn new(system_seed: u64, n_controls: usize, n_sensors: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(system_seed ^ 0x5eed_5e75_0000_0000);
        let row = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| {
            (0..n_controls)
                .map(|_| rng.random_range(lo..hi))
                .collect::<Vec<_>>()
        };
        let mut map = SensorMap {
            base: Vec::new(),
            linear: Vec::new(),
            sat_gain: Vec::new(),
            sat_mix: Vec::new(),
            sat_bias: Vec::new(),
        };
        for _ in 0..n_sensors {
            map.base.push(rng.random_range(4.0..6.0));
            map.linear.push(row(-0.8, 0.8, &mut rng));
            map.sat_gain.push(rng.random_range(0.5..1.5));
            map.sat_mix.push(row(-2.0, 2.0, &mut rng));
            map.sat_bias.push(rng.random_range(-0.5..0.5));
        }
        map
    }

    pub fn respond(&self, controls: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let lin: f64 = self.linear[j]
                .iter()
                .zip(controls)
                .map(|(a, w)| a * w)
                .sum();
            let sat: f64 = self.sat_mix[j]
                .iter()
                .zip(controls)
                .map(|(a, w)| a * w)
                .sum::<f64>()
                + self.sat_bias[j];
            *o = self.base[j] + lin + self.sat_gain[j] * sat.tanh();
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSeries {
    pub series: LabeledSeries,
    /// Noise-free, fault-free sensors (domain shift included).
    pub clean_sensors: Matrix,
}

fn control_trajectory(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let s = &cfg.schedule;
    let n_segments = cfg.n_samples.div_ceil(s.segment_len) + 1;
    let mut last = usize::MAX;
    let setpoints: Vec<Vec<f64>> = (0..n_segments)
        .map(|k| {
            let n = s.setpoints.len();
            if n == 0 {
                (0..cfg.n_controls)
                    .map(|_| {
                        if s.high > s.low {
                            rng.random_range(s.low..s.high)
                        } else {
                            s.low
                        }
                    })
                    .collect()
            } else if s.random_order && n > 1 {
                let pick = if last == usize::MAX {
                    rng.random_range(0..n)
                } else {
                    let p = rng.random_range(0..n - 1);
                    p + usize::from(p >= last)
                };
                last = pick;
                s.setpoints[pick].clone()
            } else {
                s.setpoints[k % n].clone()
            }
        })
        .collect();

    let phi: f64 = 0.9;
    let innovation = s.jitter * (1.0 - phi * phi).sqrt();
    let mut jitter: Vec<f64> = (0..cfg.n_controls)
        .map(|_| s.jitter * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut out = Vec::with_capacity(cfg.n_samples);
    for t in 0..cfg.n_samples {
        let seg = t / s.segment_len;
        let pos = t % s.segment_len;
        let target = &setpoints[seg];
        let level: Vec<f64> = if seg > 0 && pos < s.ramp_len {
            let prev = &setpoints[seg - 1];
            let a = (pos + 1) as f64 / (s.ramp_len + 1) as f64;
            prev.iter()
                .zip(target)
                .map(|(p, q)| p + a * (q - p))
                .collect()
        } else {
            target.clone()
        };
        for e in jitter.iter_mut() {
            *e = phi * *e + innovation * rng.sample::<f64, _>(StandardNormal);
        }
        out.push(level.iter().zip(&jitter).map(|(l, e)| l + e).collect());
    }
    out
}

/// Generates one labeled stream. Deterministic for a given config.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticSeries> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let map = SensorMap::new(cfg.system_seed, cfg.n_controls, cfg.n_sensors);
    let controls = control_trajectory(cfg, &mut rng);

    let (n, c, k) = (cfg.n_samples, cfg.n_controls, cfg.n_sensors);
    let mut clean = Matrix::zeros(n, k);
    let mut observed = Matrix::zeros(n, k);
    for (t, w) in controls.iter().enumerate() {
        let row = clean.row_mut(t);
        map.respond(w, row);
        for sh in &cfg.shift {
            row[sh.sensor] = sh.gain * row[sh.sensor] + sh.offset;
        }
        let noisy: Vec<f64> = row
            .iter()
            .map(|v| v + cfg.noise_sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        observed.row_mut(t).copy_from_slice(&noisy);
    }

    let mut labels = vec![0u8; n];
    if let Some(f) = &cfg.fault {
        let frozen = observed[(f.start, f.sensor)];
        for t in f.start..f.start + f.duration {
            labels[t] = 1;
            let elapsed = (t - f.start) as f64;
            let v = &mut observed[(t, f.sensor)];
            match f.kind {
                FaultKind::Offset => *v += f.amplitude,
                FaultKind::Drift => *v += f.amplitude * (elapsed + 1.0) / f.duration as f64,
                FaultKind::Stuck => *v = frozen,
                FaultKind::Oscillation => {
                    *v +=
                        f.amplitude * (2.0 * std::f64::consts::PI * elapsed / f.period as f64).sin()
                }
            }
        }
    }

    let mut values = Vec::with_capacity(n * (c + k));
    for (t, w) in controls.iter().enumerate() {
        values.extend_from_slice(w);
        values.extend_from_slice(observed.row(t));
    }
    let values = Matrix::from_vec(n, c + k, values)?;
    let timestamps = (0..n).map(|t| t as f64 / cfg.rate_hz).collect();
    let series = LabeledSeries::new(SampleBatch::new(values, cfg.schema())?, labels, timestamps)?;
    Ok(SyntheticSeries {
        series,
        clean_sensors: clean,
    })
}

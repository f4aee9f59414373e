use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    generate_synthetic, make_splits, DriftSchedule, FaultKind, FaultSpec, LabeledSeries,
    SensorShift, SplitPlan, Splits, SynthConfig,
};
use crate::error::{Error, Result};

/// Seeded source/target benchmark: a source system, a shifted (or unshifted)
/// copy as target with one injected fault, and an independent clean target
/// stream of the same length for false-alarm measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticScenario {
    pub n_controls: usize,
    pub n_sensors: usize,
    pub source_samples: usize,
    pub target_adapt_rows: usize,
    pub test_samples: usize,
    pub noise_sigma: f64,
    /// Number of discrete operating conditions shared by source and target;
    /// zero draws fresh setpoints for every segment instead.
    pub n_conditions: usize,
    pub schedule: DriftSchedule,
    /// Sensors whose target readings are offset and scaled.
    pub shifted_sensors: Vec<usize>,
    pub shift_offset: f64,
    pub shift_gain: f64,
    pub fault_kind: FaultKind,
    pub fault_sensor: usize,
    /// Fault amplitude in multiples of the sensor noise level.
    pub fault_amplitude: f64,
    /// Fault start, rows after the end of the adaptation block.
    pub fault_offset: usize,
    pub fault_duration: usize,
}

impl Default for SyntheticScenario {
    fn default() -> Self {
        SyntheticScenario {
            n_controls: 4,
            n_sensors: 8,
            source_samples: 3000,
            target_adapt_rows: 1000,
            test_samples: 1500,
            noise_sigma: 0.05,
            n_conditions: 8,
            schedule: DriftSchedule {
                segment_len: 200,
                ramp_len: 40,
                random_order: true,
                ..DriftSchedule::default()
            },
            shifted_sensors: vec![0, 2, 4, 6],
            shift_offset: 0.5,
            shift_gain: 1.1,
            fault_kind: FaultKind::Offset,
            fault_sensor: 0,
            fault_amplitude: 5.0,
            fault_offset: 600,
            fault_duration: 300,
        }
    }
}

/// One instantiated benchmark run.
#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub splits: Splits,
    /// Fault-free target stream with the test block's length and shift.
    pub clean_test: LabeledSeries,
    /// Complete generated streams the splits were cut from.
    pub source: LabeledSeries,
    pub target: LabeledSeries,
    pub clean: LabeledSeries,
}

impl SyntheticScenario {
    /// Same scenario with the target drawn from the source distribution.
    pub fn same_domain(&self) -> Self {
        SyntheticScenario {
            shifted_sensors: Vec::new(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shifted_sensors.iter().any(|&j| j >= self.n_sensors)
            || self.fault_sensor >= self.n_sensors
        {
            return Err(Error::Config(
                "scenario refers to a sensor that does not exist".into(),
            ));
        }
        if self.fault_offset + self.fault_duration > self.test_samples {
            return Err(Error::Config(
                "fault window extends past the test block".into(),
            ));
        }
        Ok(())
    }

    /// Operating conditions of the system, fixed by its seed.
    fn conditions(&self, system_seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(system_seed ^ 0xc0d1_7105);
        let (lo, hi) = (self.schedule.low, self.schedule.high);
        (0..self.n_conditions)
            .map(|_| {
                (0..self.n_controls)
                    .map(|_| {
                        if hi > lo {
                            rng.random_range(lo..hi)
                        } else {
                            lo
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn base(&self, seed: u64, system_seed: u64, n: usize) -> SynthConfig {
        let mut schedule = self.schedule.clone();
        if self.n_conditions > 0 {
            schedule.setpoints = self.conditions(system_seed);
        }
        SynthConfig {
            seed,
            system_seed,
            n_controls: self.n_controls,
            n_sensors: self.n_sensors,
            n_samples: n,
            rate_hz: 1.0,
            schedule,
            noise_sigma: self.noise_sigma,
            shift: Vec::new(),
            fault: None,
        }
    }

    fn shift(&self) -> Vec<SensorShift> {
        self.shifted_sensors
            .iter()
            .map(|&sensor| SensorShift {
                sensor,
                offset: self.shift_offset,
                gain: self.shift_gain,
            })
            .collect()
    }

    pub fn build(&self, seed: u64) -> Result<ScenarioData> {
        self.validate()?;
        // distinct streams for source, target and clean target, one physical system
        let system = seed;
        let source =
            generate_synthetic(&self.base(seed.wrapping_mul(3), system, self.source_samples))?;

        let n_target = self.target_adapt_rows + self.test_samples;
        let mut target_cfg = self.base(seed.wrapping_mul(3).wrapping_add(1), system, n_target);
        target_cfg.shift = self.shift();
        target_cfg.fault = Some(FaultSpec {
            kind: self.fault_kind,
            sensor: self.fault_sensor,
            amplitude: self.fault_amplitude * self.noise_sigma,
            start: self.target_adapt_rows + self.fault_offset,
            duration: self.fault_duration,
            period: 20,
        });
        let target = generate_synthetic(&target_cfg)?;

        let mut clean_cfg = self.base(seed.wrapping_mul(3).wrapping_add(2), system, n_target);
        clean_cfg.shift = self.shift();
        let clean = generate_synthetic(&clean_cfg)?.series;

        let splits = make_splits(
            std::slice::from_ref(&source.series),
            std::slice::from_ref(&target.series),
            &self.split_plan(),
        )?;
        let clean_test = clean.slice_rows(self.target_adapt_rows, n_target);
        Ok(ScenarioData {
            splits,
            clean_test,
            source: source.series,
            target: target.series,
            clean,
        })
    }

    /// Split protocol the scenario is evaluated with.
    pub fn split_plan(&self) -> SplitPlan {
        SplitPlan {
            source_rows: None,
            target_adapt_rows: self.target_adapt_rows,
            target_val_fraction: 0.2,
            test_rows: None,
            require_healthy_test: true,
        }
    }
}

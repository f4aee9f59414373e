use serde::{Deserialize, Serialize};

use super::schema::{FeatureSchema, SampleBatch};
use crate::error::{Error, Result};
use crate::netcore::Matrix;

/// Per-column z-score statistics.
///
/// `fitted_on` records which rows the statistics came from so callers can
/// assert they never saw test data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub fitted_on: String,
    pub fitted_rows: usize,
}

impl Standardizer {
    /// Fits on every row of `values`. Zero-variance columns get unit scale.
    pub fn fit(values: &Matrix, fitted_on: impl Into<String>) -> Self {
        let mean = values.column_means();
        let std = values
            .column_variances(&mean)
            .into_iter()
            .enumerate()
            .map(|(j, v)| {
                let s = v.sqrt();
                if s > 1e-12 {
                    s
                } else {
                    log::warn!("column {j} has zero variance; using unit scale");
                    1.0
                }
            })
            .collect();
        Standardizer {
            mean,
            std,
            fitted_on: fitted_on.into(),
            fitted_rows: values.rows(),
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, values: &Matrix) -> Result<Matrix> {
        self.check(values.cols())?;
        let mut out = values.clone();
        let cols = out.cols();
        for row in out.as_mut_slice().chunks_exact_mut(cols) {
            for ((v, m), sd) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / sd;
            }
        }
        Ok(out)
    }

    pub fn inverse(&self, values: &Matrix) -> Result<Matrix> {
        self.check(values.cols())?;
        let mut out = values.clone();
        let cols = out.cols();
        for row in out.as_mut_slice().chunks_exact_mut(cols) {
            for ((v, m), sd) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * sd + m;
            }
        }
        Ok(out)
    }

    pub fn transform_batch(&self, batch: &SampleBatch) -> Result<SampleBatch> {
        SampleBatch::new(self.transform(&batch.values)?, batch.schema.clone())
    }

    /// Maps standardized sensor columns (schema sensor order) back to raw units.
    pub fn inverse_sensors(&self, sensors: &Matrix, schema: &FeatureSchema) -> Result<Matrix> {
        self.check(schema.width())?;
        if sensors.cols() != schema.sensor_dim() {
            return Err(Error::dim(
                "sensor block width",
                schema.sensor_dim(),
                sensors.cols(),
            ));
        }
        let mut out = sensors.clone();
        let cols = out.cols();
        for row in out.as_mut_slice().chunks_exact_mut(cols) {
            for (j, &c) in schema.sensor.iter().enumerate() {
                row[j] = row[j] * self.std[c] + self.mean[c];
            }
        }
        Ok(out)
    }

    /// Sensor-column scale factors (raw units per standardized unit).
    pub fn sensor_std(&self, schema: &FeatureSchema) -> Vec<f64> {
        schema.sensor.iter().map(|&c| self.std[c]).collect()
    }

    fn check(&self, cols: usize) -> Result<()> {
        if cols != self.width() {
            return Err(Error::dim("standardizer width", self.width(), cols));
        }
        Ok(())
    }
}

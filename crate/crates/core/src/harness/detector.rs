use crate::data::{batch_ranges, LabeledSeries, SampleBatch};
use crate::detection::{
    anomaly_scores, relative_residual, sensor_scale, threshold_base_with, ScoreTrace, ScoreVariant,
    ScoringConfig, ThresholdStatistic,
};
use crate::error::{Error, Result};
use crate::models::{ae_predict, corrected_predict_parts, InferenceMode, ModelBundle};
use crate::netcore::{BnMode, Matrix};

/// Scores raw (unstandardized) sample blocks with a bundle, following the
/// bundle's inference mode.
///
/// Modes that re-estimate statistics process rows in contiguous batches of
/// `meta.stream_batch`, in order; a block is treated as one stream.
#[derive(Debug, Clone)]
pub struct Detector {
    pub bundle: ModelBundle,
}

impl Detector {
    pub fn new(bundle: ModelBundle) -> Result<Self> {
        bundle.validate()?;
        Ok(Detector { bundle })
    }

    fn check_schema(&self, batch: &SampleBatch) -> Result<()> {
        if &batch.schema != self.bundle.schema() {
            return Err(Error::Config(format!(
                "data columns {:?} do not match the bundle's {:?}",
                batch.schema.names,
                self.bundle.schema().names
            )));
        }
        Ok(())
    }

    /// Sensor predictions for one contiguous block, in standardized units.
    fn predict_block(&mut self, std_block: &SampleBatch) -> Result<Matrix> {
        let b = &mut self.bundle;
        match b.meta.inference {
            InferenceMode::Static => {
                b.ae.set_bn_mode(BnMode::Eval);
                ae_predict(std_block, &mut b.ae)
            }
            InferenceMode::PerBatchAdaBn => {
                b.ae.set_bn_mode(BnMode::AdaBn);
                let out = ae_predict(std_block, &mut b.ae);
                b.ae.set_bn_mode(BnMode::Eval);
                out
            }
            InferenceMode::Corrected => {
                let h = b
                    .adaptive
                    .as_mut()
                    .ok_or_else(|| Error::Usage("bundle has no adaptive module".into()))?;
                b.ae.set_bn_mode(BnMode::Eval);
                h.set_bn_mode(BnMode::AdaBn);
                let out = corrected_predict_parts(std_block, &mut b.ae, h);
                h.set_bn_mode(BnMode::Eval);
                out
            }
        }
    }

    /// Raw-unit sensor predictions for a raw block streamed in order.
    pub fn predict_raw(&mut self, raw: &SampleBatch) -> Result<Matrix> {
        self.check_schema(raw)?;
        let std = self.bundle.standardization.transform_batch(raw)?;
        let pred = if self.bundle.meta.inference == InferenceMode::Static {
            self.predict_block(&std)?
        } else {
            // one statistics batch per range, in stream order
            let parts = batch_ranges(std.rows(), self.bundle.meta.stream_batch)?
                .into_iter()
                .map(|r| self.predict_block(&std.slice_rows(r.start, r.end)))
                .collect::<Result<Vec<_>>>()?;
            Matrix::vcat(&parts.iter().collect::<Vec<_>>())?
        };
        self.bundle
            .standardization
            .inverse_sensors(&pred, &raw.schema)
    }

    /// Raw-unit sensor predictions for one block processed as a single
    /// statistics batch, whatever its length.
    pub fn predict_chunk(&mut self, raw: &SampleBatch) -> Result<Matrix> {
        self.check_schema(raw)?;
        let std = self.bundle.standardization.transform_batch(raw)?;
        let pred = self.predict_block(&std)?;
        self.bundle
            .standardization
            .inverse_sensors(&pred, &raw.schema)
    }

    /// Per-row anomaly scores of one block processed as a single statistics
    /// batch.
    pub fn chunk_scores(&mut self, raw: &SampleBatch) -> Result<Vec<f64>> {
        let (scale, variant) = {
            let s = self.scoring()?;
            (s.sensor_train_mean.clone(), s.variant)
        };
        let pred = self.predict_chunk(raw)?;
        let r = relative_residual(&pred, &raw.sensors(), &scale)?;
        Ok(anomaly_scores(&r, variant))
    }

    pub fn scoring(&self) -> Result<&ScoringConfig> {
        self.bundle.scoring.as_ref().ok_or_else(|| {
            Error::Usage("bundle has no scoring baseline; calibrate it first".into())
        })
    }

    /// Per-row anomaly scores of a raw block.
    pub fn raw_scores(&mut self, raw: &SampleBatch) -> Result<Vec<f64>> {
        let (scale, variant) = {
            let s = self.scoring()?;
            (s.sensor_train_mean.clone(), s.variant)
        };
        self.scores_with(raw, &scale, variant)
    }

    fn scores_with(
        &mut self,
        raw: &SampleBatch,
        scale: &[f64],
        variant: ScoreVariant,
    ) -> Result<Vec<f64>> {
        let pred = self.predict_raw(raw)?;
        let r = relative_residual(&pred, &raw.sensors(), scale)?;
        Ok(anomaly_scores(&r, variant))
    }

    /// Sets the scoring baseline from healthy target segments: the per-sensor
    /// scale from all of their rows, the threshold base from their smoothed
    /// scores with each segment streamed and smoothed on its own.
    pub fn calibrate(
        &mut self,
        healthy: &[&SampleBatch],
        window: usize,
        alpha: f64,
        variant: ScoreVariant,
        statistic: ThresholdStatistic,
    ) -> Result<&ScoringConfig> {
        if healthy.is_empty() {
            return Err(Error::InsufficientData(
                "no healthy calibration data".into(),
            ));
        }
        let all = SampleBatch::concat(healthy)?;
        let scale = sensor_scale(&all.sensors());
        let segments = healthy
            .iter()
            .map(|seg| self.scores_with(seg, &scale, variant))
            .collect::<Result<Vec<_>>>()?;
        let cfg = ScoringConfig {
            sensor_train_mean: scale,
            threshold_base: threshold_base_with(&segments, window, statistic)?,
            statistic,
            window,
            alpha,
            variant,
        };
        cfg.validate()?;
        self.bundle.scoring = Some(cfg);
        Ok(self.bundle.scoring.as_ref().expect("just set"))
    }

    /// Scores, smooths and labels a series; ground truth rides along.
    pub fn score(&mut self, series: &LabeledSeries) -> Result<ScoreTrace> {
        let raw = self.raw_scores(&series.batch)?;
        ScoreTrace::build(raw, self.scoring()?, Some(&series.labels))
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::detector::Detector;
use super::metrics::{accuracy, auc, f1_score, false_alarm_rate};
use crate::adaptation::{
    adabn_transform, pretrain_mmd, pretrain_source, train_adaptive_with, AdaBnScope, MmdConfig,
    TrainConfig, TrainReport,
};
use crate::data::{SampleBatch, Splits, Standardizer};
use crate::detection::{
    ScoreTrace, ScoreVariant, ThresholdStatistic, DEFAULT_ALPHA, DEFAULT_WINDOW,
};
use crate::error::{Error, Result};
use crate::models::{AutoencoderModel, InferenceMode, ModelBundle, OutputActivation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    SourceOnly,
    Adabn,
    Mmd,
    Tard,
}

impl MethodId {
    pub const ALL: [MethodId; 4] = [
        MethodId::SourceOnly,
        MethodId::Adabn,
        MethodId::Mmd,
        MethodId::Tard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::SourceOnly => "source_only",
            MethodId::Adabn => "adabn",
            MethodId::Mmd => "mmd",
            MethodId::Tard => "tard",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method `{s}` (expected source_only, adabn, mmd or tard)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringSettings {
    pub window: usize,
    pub alpha: f64,
    pub variant: ScoreVariant,
    pub statistic: ThresholdStatistic,
}

impl Default for ScoringSettings {
    fn default() -> Self {
        ScoringSettings {
            window: DEFAULT_WINDOW,
            alpha: DEFAULT_ALPHA,
            variant: ScoreVariant::MeanPlusMax,
            statistic: ThresholdStatistic::default(),
        }
    }
}

/// Everything a method run needs besides data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodSettings {
    pub train: TrainConfig,
    pub mmd: MmdConfig,
    pub adabn_scope: AdaBnScope,
    pub output_activation: OutputActivation,
    /// Rows per test-time batch; defaults to the training batch size.
    pub stream_batch: Option<usize>,
    pub scoring: ScoringSettings,
}

impl Default for MethodSettings {
    fn default() -> Self {
        MethodSettings {
            train: TrainConfig::default(),
            mmd: MmdConfig::default(),
            adabn_scope: AdaBnScope::Batch,
            output_activation: OutputActivation::Relu,
            stream_batch: None,
            scoring: ScoringSettings::default(),
        }
    }
}

impl MethodSettings {
    pub fn stream_batch(&self) -> usize {
        self.stream_batch.unwrap_or(self.train.batch_size)
    }
}

/// Raw splits plus the standardization fitted on the source training rows.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub standardizer: Standardizer,
    pub source: SampleBatch,
    pub target_adapt: SampleBatch,
    pub target_val: SampleBatch,
}

impl Prepared {
    pub fn new(splits: &Splits) -> Self {
        Prepared {
            standardizer: Standardizer::fit(&splits.source.values, "source training rows"),
            source: splits.source.clone(),
            target_adapt: splits.target_adapt.clone(),
            target_val: splits.target_val.clone(),
        }
    }

    fn std(&self, b: &SampleBatch) -> Result<SampleBatch> {
        self.standardizer.transform_batch(b)
    }
}

/// A method's trained state, ready to score.
#[derive(Debug, Clone)]
pub struct FittedMethod {
    pub method: MethodId,
    pub detector: Detector,
    pub reports: Vec<TrainReport>,
}

/// Pretrained source autoencoder shared by the methods that start from it.
/// Pretraining is deterministic, so sharing it is only a saving.
#[derive(Debug, Default)]
pub struct PretrainCache {
    source: Option<(AutoencoderModel, Option<TrainReport>)>,
}

impl PretrainCache {
    /// Starts from an autoencoder trained elsewhere; no training report is
    /// attached to the methods that use it.
    pub fn with_model(model: AutoencoderModel) -> Self {
        PretrainCache {
            source: Some((model, None)),
        }
    }

    fn get(
        &mut self,
        prepared: &Prepared,
        cfg: &TrainConfig,
    ) -> Result<(AutoencoderModel, Option<TrainReport>)> {
        if self.source.is_none() {
            let t = pretrain_source(&prepared.std(&prepared.source)?, cfg)?;
            self.source = Some((t.model, Some(t.report)));
        }
        Ok(self.source.clone().expect("filled above"))
    }
}

pub fn fit_method(
    method: MethodId,
    prepared: &Prepared,
    settings: &MethodSettings,
    cache: &mut PretrainCache,
) -> Result<FittedMethod> {
    let mut inner = || -> Result<FittedMethod> {
        let train = &settings.train;
        let schema = prepared.source.schema.clone();
        let adapt_std = prepared.std(&prepared.target_adapt)?;
        let val_std = prepared.std(&prepared.target_val)?;
        let mut reports = Vec::new();
        let (ae, inference, adaptive) = match method {
            MethodId::SourceOnly => {
                let (ae, report) = cache.get(prepared, train)?;
                reports.extend(report);
                (ae, InferenceMode::Static, None)
            }
            MethodId::Adabn => {
                let (ae, report) = cache.get(prepared, train)?;
                reports.extend(report);
                match settings.adabn_scope {
                    AdaBnScope::Batch => (ae, InferenceMode::PerBatchAdaBn, None),
                    AdaBnScope::Global => {
                        let all = SampleBatch::concat(&[&adapt_std, &val_std])?;
                        (adabn_transform(&ae, &all)?, InferenceMode::Static, None)
                    }
                }
            }
            MethodId::Mmd => {
                let t = pretrain_mmd(
                    &prepared.std(&prepared.source)?,
                    &adapt_std,
                    train,
                    &settings.mmd,
                )?;
                reports.push(t.report);
                (t.model, InferenceMode::Static, None)
            }
            MethodId::Tard => {
                let (ae, report) = cache.get(prepared, train)?;
                reports.extend(report);
                let h = train_adaptive_with(
                    &adapt_std,
                    &val_std,
                    &ae,
                    settings.output_activation,
                    train,
                )?;
                reports.push(h.report);
                (ae, InferenceMode::Corrected, Some(h.model))
            }
        };
        let mut bundle = ModelBundle::new(train.seed, schema, ae, prepared.standardizer.clone())?;
        bundle.adaptive = adaptive;
        bundle.meta.inference = inference;
        bundle.meta.stream_batch = settings.stream_batch();
        let mut detector = Detector::new(bundle)?;
        let sc = &settings.scoring;
        detector.calibrate(
            &[&prepared.target_adapt, &prepared.target_val],
            sc.window,
            sc.alpha,
            sc.variant,
            sc.statistic,
        )?;
        Ok(FittedMethod {
            method,
            detector,
            reports,
        })
    };
    inner().map_err(|e| e.context(format!("method {method}")))
}

/// Metrics over the rows that have a smoothed score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
    /// Absent when the evaluated rows hold a single class.
    pub auc: Option<f64>,
    pub false_alarm_rate: f64,
    pub rows: usize,
}

pub fn trace_metrics(trace: &ScoreTrace) -> Result<Metrics> {
    let truth = trace
        .truth
        .as_ref()
        .ok_or_else(|| Error::Usage("trace has no ground truth".into()))?;
    let auc = match auc(&trace.smoothed, truth) {
        Ok(v) => Some(v),
        Err(Error::UndefinedAuc(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Metrics {
        accuracy: accuracy(&trace.labels, truth)?,
        f1: f1_score(&trace.labels, truth)?,
        auc,
        false_alarm_rate: false_alarm_rate(&trace.labels, truth)?,
        rows: truth.len(),
    })
}

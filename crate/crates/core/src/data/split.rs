use serde::{Deserialize, Serialize};

use super::schema::{LabeledSeries, SampleBatch};
use crate::error::{Error, Result};

fn default_val_fraction() -> f64 {
    0.2
}

fn default_true() -> bool {
    true
}

/// How source and target recordings are carved into training, adaptation
/// and test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Healthy source rows used for pretraining, taken from the start of the
    /// source collection. `None` uses every healthy source row.
    #[serde(default)]
    pub source_rows: Option<usize>,
    /// Number `m` of healthy target rows available for adaptation.
    pub target_adapt_rows: usize,
    /// Fraction of the adaptation rows held out (from their end) for
    /// validation and early stopping.
    #[serde(default = "default_val_fraction")]
    pub target_val_fraction: f64,
    /// Optional cap on the number of test rows.
    #[serde(default)]
    pub test_rows: Option<usize>,
    /// Fail when the test remainder has no healthy rows.
    #[serde(default = "default_true")]
    pub require_healthy_test: bool,
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        if self.target_adapt_rows < 2 {
            return Err(Error::Config("target_adapt_rows must be at least 2".into()));
        }
        if !(self.target_val_fraction > 0.0 && self.target_val_fraction <= 0.5) {
            return Err(Error::Config(format!(
                "target_val_fraction {} outside (0, 0.5]",
                self.target_val_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub source: SampleBatch,
    pub target_adapt: SampleBatch,
    pub target_val: SampleBatch,
    pub test: LabeledSeries,
    /// Faulty target rows that preceded the last adaptation row and are
    /// therefore in neither the adaptation nor the test set.
    pub dropped_rows: usize,
}

/// Splits source and target collections according to `plan`.
///
/// Adaptation rows are the first `m` healthy target rows in collection order;
/// the test set is every target row after the last of them, so adaptation
/// data strictly precedes test data.
pub fn make_splits(
    source: &[LabeledSeries],
    target: &[LabeledSeries],
    plan: &SplitPlan,
) -> Result<Splits> {
    plan.validate()?;
    let source_all = LabeledSeries::concat(&source.iter().collect::<Vec<_>>())
        .map_err(|e| e.context("source collection"))?;
    let mut healthy: Vec<usize> = (0..source_all.rows())
        .filter(|&i| source_all.labels[i] == 0)
        .collect();
    if let Some(n) = plan.source_rows {
        if healthy.len() < n {
            return Err(Error::InsufficientData(format!(
                "source has {} healthy rows, plan asks for {n}",
                healthy.len()
            )));
        }
        healthy.truncate(n);
    }
    if healthy.len() < 2 {
        return Err(Error::InsufficientData(
            "source has fewer than 2 healthy rows".into(),
        ));
    }
    let source_batch = source_all.batch.select_rows(&healthy);

    let target_all = LabeledSeries::concat(&target.iter().collect::<Vec<_>>())
        .map_err(|e| e.context("target collection"))?;
    if target_all.batch.schema != source_batch.schema {
        return Err(Error::Config("source and target schemas differ".into()));
    }
    let m = plan.target_adapt_rows;
    let adapt_idx: Vec<usize> = (0..target_all.rows())
        .filter(|&i| target_all.labels[i] == 0)
        .take(m)
        .collect();
    if adapt_idx.len() < m {
        return Err(Error::InsufficientData(format!(
            "target has {} healthy rows, plan asks for {m}",
            adapt_idx.len()
        )));
    }
    let last = *adapt_idx.last().expect("m >= 2");
    let dropped_rows = last + 1 - m;

    let mut test_end = target_all.rows();
    if let Some(cap) = plan.test_rows {
        test_end = test_end.min(last + 1 + cap);
    }
    if last + 1 >= test_end {
        return Err(Error::InsufficientData(
            "no target rows remain for testing".into(),
        ));
    }
    let test = target_all.slice_rows(last + 1, test_end);
    if plan.require_healthy_test && test.labels.iter().all(|&l| l == 1) {
        return Err(Error::InsufficientData(
            "test remainder has no healthy rows".into(),
        ));
    }

    let n_val = ((m as f64) * plan.target_val_fraction).ceil() as usize;
    let n_val = n_val.clamp(1, m - 1);
    let adapt = target_all.batch.select_rows(&adapt_idx);
    Ok(Splits {
        source: source_batch,
        target_adapt: adapt.slice_rows(0, m - n_val),
        target_val: adapt.slice_rows(m - n_val, m),
        test,
        dropped_rows,
    })
}

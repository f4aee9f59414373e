use serde::{Deserialize, Serialize};

use crate::data::SampleBatch;
use crate::error::{Error, Result};
use crate::models::AutoencoderModel;
use crate::netcore::BnMode;

/// Where replacement statistics come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaBnScope {
    /// Each incoming test batch re-estimates the statistics before it is scored.
    #[default]
    Batch,
    /// Statistics are estimated once on the healthy target adaptation rows.
    Global,
}

/// Copy of `model` whose every batch-norm running statistic is replaced by
/// the statistics of `batch` as it flows through the network. Weights are
/// untouched; the copy is left in Eval mode.
pub fn adabn_transform(model: &AutoencoderModel, batch: &SampleBatch) -> Result<AutoencoderModel> {
    if batch.rows() < 2 {
        return Err(Error::DegenerateBatch(format!(
            "statistics replacement needs at least 2 rows, got {}",
            batch.rows()
        )));
    }
    let mut out = model.clone();
    out.check_batch(batch)?;
    out.encoder.set_bn_mode(BnMode::AdaBn);
    out.encoder.forward(&batch.model_input())?;
    out.set_bn_mode(BnMode::Eval);
    Ok(out)
}

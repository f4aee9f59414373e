use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adaptive::AdaptiveModule;
use super::autoencoder::AutoencoderModel;
use crate::data::{FeatureSchema, Standardizer};
use crate::detection::ScoringConfig;
use crate::error::{Error, Result};
use crate::netcore::Network;

pub const BUNDLE_FORMAT: u32 = 1;
pub const DEFAULT_STREAM_BATCH: usize = 64;

/// How a bundle turns a block of samples into sensor predictions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    /// Autoencoder with its stored statistics; rows are independent.
    #[default]
    Static,
    /// Autoencoder statistics re-estimated on every stream batch.
    PerBatchAdaBn,
    /// Frozen autoencoder plus the correction module, whose statistics are
    /// re-estimated on every stream batch.
    Corrected,
}

fn default_stream_batch() -> usize {
    DEFAULT_STREAM_BATCH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub format: u32,
    pub seed: u64,
    pub sensor_dim: usize,
    pub control_dim: usize,
    pub latent_dim: usize,
    pub schema: FeatureSchema,
    #[serde(default)]
    pub inference: InferenceMode,
    /// Rows per batch when streaming with re-estimated statistics.
    #[serde(default = "default_stream_batch")]
    pub stream_batch: usize,
}

/// Everything needed to score new data: both networks, the feature
/// partition, the standardization fitted on training data and the scoring
/// baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub meta: BundleMeta,
    pub ae: AutoencoderModel,
    #[serde(default)]
    pub adaptive: Option<AdaptiveModule>,
    pub standardization: Standardizer,
    #[serde(default)]
    pub scoring: Option<ScoringConfig>,
}

impl ModelBundle {
    pub fn new(
        seed: u64,
        schema: FeatureSchema,
        ae: AutoencoderModel,
        standardization: Standardizer,
    ) -> Result<Self> {
        let bundle = ModelBundle {
            meta: BundleMeta {
                format: BUNDLE_FORMAT,
                seed,
                sensor_dim: schema.sensor_dim(),
                control_dim: schema.control_dim(),
                latent_dim: ae.latent_dim(),
                schema,
                inference: InferenceMode::Static,
                stream_batch: DEFAULT_STREAM_BATCH,
            },
            ae,
            adaptive: None,
            standardization,
            scoring: None,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.meta.schema
    }

    /// Cross-checks the partition descriptor against every network and
    /// statistics vector. Errors name the offending field by path.
    pub fn validate(&self) -> Result<()> {
        let m = &self.meta;
        if m.format != BUNDLE_FORMAT {
            return Err(Error::parse(
                "meta.format",
                format!("unsupported format {}, expected {BUNDLE_FORMAT}", m.format),
            ));
        }
        m.schema
            .validate()
            .map_err(|e| Error::parse("meta.schema", e.to_string()))?;
        expect("meta.sensor_dim", m.schema.sensor_dim(), m.sensor_dim)?;
        expect("meta.control_dim", m.schema.control_dim(), m.control_dim)?;

        check_network("ae.encoder", &self.ae.encoder)?;
        check_network("ae.decoder", &self.ae.decoder)?;
        expect(
            "ae.encoder input width",
            m.sensor_dim + m.control_dim,
            self.ae.input_dim(),
        )?;
        expect("meta.latent_dim", self.ae.latent_dim(), m.latent_dim)?;
        expect(
            "ae.decoder input width",
            m.latent_dim,
            self.ae.decoder.in_dim().unwrap_or(0),
        )?;
        expect(
            "ae.decoder output width",
            m.sensor_dim,
            self.ae.sensor_dim(),
        )?;

        if m.stream_batch < 2 {
            return Err(Error::parse("meta.stream_batch", "must be at least 2"));
        }
        if m.inference == InferenceMode::Corrected && self.adaptive.is_none() {
            return Err(Error::parse(
                "adaptive",
                "inference mode `corrected` needs an adaptive module",
            ));
        }
        if let Some(a) = &self.adaptive {
            check_network("adaptive.net", &a.net)?;
            expect("adaptive.net input width", m.control_dim, a.control_dim())?;
            expect("adaptive.net output width", m.sensor_dim, a.sensor_dim())?;
        }

        let s = &self.standardization;
        expect("standardization.mean", m.schema.width(), s.mean.len())?;
        expect("standardization.std", m.schema.width(), s.std.len())?;
        if let Some(j) = s.std.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::parse(
                format!("standardization.std[{j}]"),
                "must be positive and finite",
            ));
        }
        if !s.mean.iter().all(|v| v.is_finite()) {
            return Err(Error::parse("standardization.mean", "non-finite value"));
        }

        if let Some(sc) = &self.scoring {
            expect(
                "scoring.sensor_train_mean",
                m.sensor_dim,
                sc.sensor_train_mean.len(),
            )?;
            sc.validate()
                .map_err(|e| Error::parse("scoring", e.to_string()))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::parse("bundle", e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let bundle: ModelBundle = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::parse(
                if path == "." { "bundle".into() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        bundle.validate()?;
        Ok(bundle)
    }
}

fn expect(field: &str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::parse(
            field,
            format!("dimension {actual} does not match expected {expected}"),
        ))
    }
}

fn check_network(prefix: &str, net: &Network) -> Result<()> {
    net.validate()
        .map_err(|(field, msg)| Error::parse(format!("{prefix}.{field}"), msg))
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    bundle.validate()?;
    std::fs::write(path, bundle.to_json()?)?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let text = std::fs::read_to_string(path)?;
    ModelBundle::from_json(&text).map_err(|e| e.context(format!("loading {}", path.display())))
}

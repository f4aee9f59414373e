use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pipeline::{MethodId, MethodSettings};
use super::synthetic::SyntheticScenario;
use crate::data::{ingest_csv, LabeledSeries, Manifest, SplitPlan};
use crate::error::{Error, Result};

/// One recorded file and the manifest describing its columns and faults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    /// Half-open row range `[start, end)` to keep; `None` keeps every row.
    #[serde(default)]
    pub rows: Option<[usize; 2]>,
}

impl FileEntry {
    fn resolve(&mut self, base: &Path) {
        self.csv = base.join(&self.csv);
        self.manifest = base.join(&self.manifest);
    }

    pub fn load(&self) -> Result<LabeledSeries> {
        let manifest = Manifest::load(&self.manifest)?;
        let series = ingest_csv(&self.csv, &manifest)?;
        match self.rows {
            None => Ok(series),
            Some([start, end]) => {
                if start >= end || end > series.rows() {
                    return Err(Error::Config(format!(
                        "row range [{start}, {end}) does not fit the {} rows of {}",
                        series.rows(),
                        self.csv.display()
                    )));
                }
                Ok(series.slice_rows(start, end))
            }
        }
    }
}

/// A target domain: files concatenated in the listed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub name: String,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvData {
    pub source: Vec<FileEntry>,
    pub cases: Vec<CaseEntry>,
    pub split: SplitPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataConfig {
    Synthetic(SyntheticScenario),
    Csv(CsvData),
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Synthetic(SyntheticScenario::default())
    }
}

fn default_methods() -> Vec<MethodId> {
    MethodId::ALL.to_vec()
}

fn default_repeats() -> usize {
    1
}

/// Everything an evaluation run depends on besides the data files.
///
/// `seed` overrides `train.seed`. With synthetic data, `repeats > 1` runs
/// seeds `seed, seed + 1, …` and adds per-method medians to the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodId>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(flatten)]
    pub settings: MethodSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            methods: default_methods(),
            repeats: 1,
            data: DataConfig::default(),
            settings: MethodSettings::default(),
        }
    }
}

impl RunConfig {
    /// Reads TOML (or JSON for a `.json` extension). Relative data paths are
    /// resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("reading config {}", path.display())))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("run config", e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("run config", e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let DataConfig::Csv(csv) = &mut self.data {
            for f in csv
                .source
                .iter_mut()
                .chain(csv.cases.iter_mut().flat_map(|c| c.files.iter_mut()))
            {
                f.resolve(base);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("method list is empty".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        self.settings.train.validate()?;
        self.settings.mmd.validate()?;
        if self.settings.stream_batch() < 2 {
            return Err(Error::Config("stream_batch must be >= 2".into()));
        }
        let sc = &self.settings.scoring;
        if sc.window == 0 || !(sc.alpha > 0.0) {
            return Err(Error::Config(
                "scoring needs window >= 1 and alpha > 0".into(),
            ));
        }
        match &self.data {
            DataConfig::Synthetic(s) => s.validate(),
            DataConfig::Csv(c) => {
                if self.repeats != 1 {
                    return Err(Error::Config(
                        "repeats applies to synthetic data only".into(),
                    ));
                }
                if c.source.is_empty() || c.cases.is_empty() {
                    return Err(Error::Config(
                        "csv data needs source files and at least one case".into(),
                    ));
                }
                if let Some(c) = c.cases.iter().find(|c| c.files.is_empty()) {
                    return Err(Error::Config(format!("case `{}` lists no files", c.name)));
                }
                c.split.validate()
            }
        }
    }

    /// Method settings with the run seed applied.
    pub fn method_settings(&self, seed: u64) -> MethodSettings {
        let mut s = self.settings.clone();
        s.train.seed = seed;
        s
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Operator- or controller-set input defining the operating condition.
    Control,
    /// Monitored signal; reconstructed and scored.
    Sensor,
}

/// Column names with a control/sensor partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
    pub control: Vec<usize>,
    pub sensor: Vec<usize>,
    #[serde(default)]
    pub units: Vec<String>,
}

impl FeatureSchema {
    pub fn new(
        names: Vec<String>,
        control: Vec<usize>,
        sensor: Vec<usize>,
        units: Vec<String>,
    ) -> Result<Self> {
        let schema = FeatureSchema {
            names,
            control,
            sensor,
            units,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Builds a schema from `(name, role)` pairs in column order.
    pub fn from_roles<S: AsRef<str>>(columns: &[(S, Role)]) -> Result<Self> {
        let names = columns
            .iter()
            .map(|(n, _)| n.as_ref().to_string())
            .collect();
        let control = (0..columns.len())
            .filter(|&i| columns[i].1 == Role::Control)
            .collect();
        let sensor = (0..columns.len())
            .filter(|&i| columns[i].1 == Role::Sensor)
            .collect();
        FeatureSchema::new(names, control, sensor, Vec::new())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.names.len();
        if self.control.is_empty() {
            return Err(Error::Config("schema has no control columns".into()));
        }
        if self.sensor.is_empty() {
            return Err(Error::Config("schema has no sensor columns".into()));
        }
        let mut seen = vec![0u8; n];
        for &i in self.control.iter().chain(&self.sensor) {
            if i >= n {
                return Err(Error::Config(format!(
                    "column index {i} out of range for {n} columns"
                )));
            }
            seen[i] += 1;
        }
        if let Some(i) = seen.iter().position(|&c| c != 1) {
            let what = if seen[i] == 0 {
                "is neither control nor sensor"
            } else {
                "is assigned more than once"
            };
            return Err(Error::Config(format!("column `{}` {what}", self.names[i])));
        }
        if !self.units.is_empty() && self.units.len() != n {
            return Err(Error::dim("schema units", n, self.units.len()));
        }
        for (i, a) in self.names.iter().enumerate() {
            if self.names[..i].contains(a) {
                return Err(Error::Config(format!("duplicate column name `{a}`")));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn control_dim(&self) -> usize {
        self.control.len()
    }

    pub fn sensor_dim(&self) -> usize {
        self.sensor.len()
    }

    pub fn sensor_names(&self) -> Vec<&str> {
        self.sensor
            .iter()
            .map(|&i| self.names[i].as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// Closed interval of fault time, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultWindow {
    pub start_s: f64,
    pub end_s: f64,
}

impl FaultWindow {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s && t <= self.end_s
    }
}

fn default_rate() -> f64 {
    1.0
}

/// Column roles and fault windows for one recorded file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub faults: Vec<FaultWindow>,
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    /// Recorded length, for documentation and label-fraction checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

impl Manifest {
    /// Reads a TOML manifest (or JSON when the extension is `.json`).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("reading manifest {}", path.display())))?;
        let manifest: Manifest = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
        } else {
            toml::from_str(&text)
                .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz > 0.0) {
            return Err(Error::parse("rate_hz", "must be positive"));
        }
        for (i, w) in self.faults.iter().enumerate() {
            if !(w.end_s >= w.start_s) {
                return Err(Error::parse(
                    format!("faults[{i}]"),
                    "end_s precedes start_s",
                ));
            }
        }
        self.schema().map(|_| ())
    }

    pub fn schema(&self) -> Result<FeatureSchema> {
        let names = self.columns.iter().map(|c| c.name.clone()).collect();
        let control = (0..self.columns.len())
            .filter(|&i| self.columns[i].role == Role::Control)
            .collect();
        let sensor = (0..self.columns.len())
            .filter(|&i| self.columns[i].role == Role::Sensor)
            .collect();
        let units = if self.columns.iter().any(|c| c.unit.is_some()) {
            self.columns
                .iter()
                .map(|c| c.unit.clone().unwrap_or_default())
                .collect()
        } else {
            Vec::new()
        };
        FeatureSchema::new(names, control, sensor, units)
    }

    /// Manifest listing the schema's columns in order, without faults.
    pub fn from_schema(schema: &FeatureSchema) -> Self {
        let columns = schema
            .names
            .iter()
            .enumerate()
            .map(|(i, name)| ColumnSpec {
                name: name.clone(),
                role: if schema.control.contains(&i) {
                    Role::Control
                } else {
                    Role::Sensor
                },
                unit: schema.units.get(i).filter(|u| !u.is_empty()).cloned(),
                description: None,
            })
            .collect();
        Manifest {
            name: None,
            columns,
            faults: Vec::new(),
            rate_hz: default_rate(),
            duration_s: None,
        }
    }

    /// Manifest whose fault windows span each run of consecutive faulty
    /// rows of `series`, from its first to its last timestamp.
    pub fn for_series(series: &LabeledSeries) -> Self {
        let mut m = Manifest::from_schema(&series.batch.schema);
        let (l, t) = (&series.labels, &series.timestamps);
        let mut i = 0;
        while i < l.len() {
            if l[i] == 1 {
                let start = i;
                while i + 1 < l.len() && l[i + 1] == 1 {
                    i += 1;
                }
                m.faults.push(FaultWindow {
                    start_s: t[start],
                    end_s: t[i],
                });
            }
            i += 1;
        }
        m
    }

    /// Truth label for a timestamp: 1 inside any fault window.
    pub fn label_at(&self, t: f64) -> u8 {
        u8::from(self.faults.iter().any(|w| w.contains(t)))
    }
}

/// Rows of samples with a declared control/sensor partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub values: Matrix,
    pub schema: FeatureSchema,
}

impl SampleBatch {
    pub fn new(values: Matrix, schema: FeatureSchema) -> Result<Self> {
        if values.cols() != schema.width() {
            return Err(Error::dim(
                "sample batch width",
                schema.width(),
                values.cols(),
            ));
        }
        Ok(SampleBatch { values, schema })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    /// Sensor block `x`, columns in schema order.
    pub fn sensors(&self) -> Matrix {
        self.values.select_columns(&self.schema.sensor)
    }

    /// Control block `w`.
    pub fn controls(&self) -> Matrix {
        self.values.select_columns(&self.schema.control)
    }

    /// Model input `[x, w]`.
    pub fn model_input(&self) -> Matrix {
        let order: Vec<usize> = self
            .schema
            .sensor
            .iter()
            .chain(&self.schema.control)
            .copied()
            .collect();
        self.values.select_columns(&order)
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> SampleBatch {
        SampleBatch {
            values: self.values.slice_rows(start, end),
            schema: self.schema.clone(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> SampleBatch {
        SampleBatch {
            values: self.values.select_rows(rows),
            schema: self.schema.clone(),
        }
    }

    pub fn concat(parts: &[&SampleBatch]) -> Result<SampleBatch> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Usage("concatenating zero batches".into()))?;
        if let Some(p) = parts.iter().find(|p| p.schema != first.schema) {
            return Err(Error::Config(format!(
                "cannot concatenate batches with different schemas ({:?} vs {:?})",
                first.schema.names, p.schema.names
            )));
        }
        let values: Vec<&Matrix> = parts.iter().map(|p| &p.values).collect();
        Ok(SampleBatch {
            values: Matrix::vcat(&values)?,
            schema: first.schema.clone(),
        })
    }
}

/// A sample batch with per-row truth labels and timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub batch: SampleBatch,
    pub labels: Vec<u8>,
    pub timestamps: Vec<f64>,
}

impl LabeledSeries {
    pub fn new(batch: SampleBatch, labels: Vec<u8>, timestamps: Vec<f64>) -> Result<Self> {
        if labels.len() != batch.rows() {
            return Err(Error::dim("label count", batch.rows(), labels.len()));
        }
        if timestamps.len() != batch.rows() {
            return Err(Error::dim(
                "timestamp count",
                batch.rows(),
                timestamps.len(),
            ));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Config(format!(
                "timestamps decrease at row {}",
                i + 1
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Config("labels must be 0 or 1".into()));
        }
        Ok(LabeledSeries {
            batch,
            labels,
            timestamps,
        })
    }

    pub fn rows(&self) -> usize {
        self.batch.rows()
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> LabeledSeries {
        LabeledSeries {
            batch: self.batch.slice_rows(start, end),
            labels: self.labels[start..end].to_vec(),
            timestamps: self.timestamps[start..end].to_vec(),
        }
    }

    /// Concatenates series in the given order. Timestamps are kept as-is, so
    /// monotonicity is only checked within each part.
    pub fn concat(parts: &[&LabeledSeries]) -> Result<LabeledSeries> {
        let batches: Vec<&SampleBatch> = parts.iter().map(|p| &p.batch).collect();
        Ok(LabeledSeries {
            batch: SampleBatch::concat(&batches)?,
            labels: parts
                .iter()
                .flat_map(|p| p.labels.iter().copied())
                .collect(),
            timestamps: parts
                .iter()
                .flat_map(|p| p.timestamps.iter().copied())
                .collect(),
        })
    }

    pub fn fault_fraction(&self) -> f64 {
        self.labels.iter().map(|&l| l as f64).sum::<f64>() / self.rows() as f64
    }
}

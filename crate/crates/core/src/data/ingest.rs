use std::path::Path;

use super::schema::{LabeledSeries, Manifest, SampleBatch};
use crate::error::{Error, Result};
use crate::netcore::Matrix;

/// Name of the mandatory timestamp column.
pub const TIME_COLUMN: &str = "t";

/// Reads a comma-separated file whose header names `t` followed by (at least)
/// the manifest's columns, labeling rows that fall inside a fault window.
///
/// Extra columns not named in the manifest are ignored. Row numbers in errors
/// are 1-based file lines (the header is line 1).
pub fn ingest_csv(path: &Path, manifest: &Manifest) -> Result<LabeledSeries> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::from(e).context(format!("opening {}", path.display())))?;
    ingest_reader(file, path, manifest)
}

pub fn ingest_reader<R: std::io::Read>(
    reader: R,
    path: &Path,
    manifest: &Manifest,
) -> Result<LabeledSeries> {
    let schema = manifest.schema()?;
    let csv_err = |row: usize, column: &str, message: String| Error::Csv {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message,
    };

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| csv_err(1, "", e.to_string()))?
        .clone();
    let position = |name: &str| header.iter().position(|h| h == name);
    let time_pos = position(TIME_COLUMN)
        .ok_or_else(|| csv_err(1, TIME_COLUMN, "missing timestamp column".into()))?;
    let mut positions = Vec::with_capacity(schema.width());
    for name in &schema.names {
        positions.push(
            position(name).ok_or_else(|| csv_err(1, name, "column missing from header".into()))?,
        );
    }

    let mut values = Vec::new();
    let mut timestamps = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_err(line, "", e.to_string()))?;
        let parse = |pos: usize, name: &str| -> Result<f64> {
            let cell = record.get(pos).unwrap_or("");
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(csv_err(line, name, format!("non-numeric value `{cell}`"))),
            }
        };
        let t = parse(time_pos, TIME_COLUMN)?;
        if let Some(&prev) = timestamps.last() {
            if t < prev {
                return Err(csv_err(
                    line,
                    TIME_COLUMN,
                    format!("time goes backwards ({t} after {prev})"),
                ));
            }
        }
        for (&pos, name) in positions.iter().zip(&schema.names) {
            values.push(parse(pos, name)?);
        }
        labels.push(manifest.label_at(t));
        timestamps.push(t);
    }
    if timestamps.is_empty() {
        return Err(csv_err(2, "", "file has no data rows".into()));
    }
    let matrix = Matrix::from_vec(timestamps.len(), schema.width(), values)?;
    LabeledSeries::new(SampleBatch::new(matrix, schema)?, labels, timestamps)
}

/// Writes a series as CSV with a leading `t` column.
pub fn write_csv(path: &Path, series: &LabeledSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    let mut header = vec![TIME_COLUMN.to_string()];
    header.extend(series.batch.schema.names.iter().cloned());
    w.write_record(&header).map_err(|e| Error::Io(e.into()))?;
    for (row, t) in series.batch.values.row_iter().zip(&series.timestamps) {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

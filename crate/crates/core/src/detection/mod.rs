//! Residual scoring: relative residuals, per-sample anomaly score, windowed
//! min smoothing and threshold decision.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::Matrix;

/// Floor applied to per-sensor scales and to the threshold base.
pub const EPS_FLOOR: f64 = 1e-9;
pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_ALPHA: f64 = 1.0;

/// How per-sensor relative residuals are combined into one score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    /// Mean over sensors plus the largest single-sensor residual.
    #[default]
    MeanPlusMax,
    /// Mean over sensors plus the sum over sensors.
    MeanPlusSum,
}

/// How healthy smoothed scores are summarized into the threshold base.
///
/// `Max` puts the threshold at the largest smoothed healthy score, so the
/// healthy calibration data itself raises no alarm at `alpha = 1`. `Mean`
/// flags roughly every smoothed score above the healthy average.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStatistic {
    Mean,
    #[default]
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    /// Mean absolute raw level of each sensor over the healthy target
    /// training and validation data.
    pub sensor_train_mean: Vec<f64>,
    /// Summary of the smoothed scores on healthy target training and
    /// validation data.
    pub threshold_base: f64,
    #[serde(default)]
    pub statistic: ThresholdStatistic,
    pub window: usize,
    pub alpha: f64,
    #[serde(default)]
    pub variant: ScoreVariant,
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sensor_train_mean.is_empty() {
            return Err(Error::Config("sensor_train_mean is empty".into()));
        }
        if let Some(j) = self
            .sensor_train_mean
            .iter()
            .position(|v| !(*v > 0.0) || !v.is_finite())
        {
            return Err(Error::Config(format!(
                "sensor_train_mean[{j}] must be positive"
            )));
        }
        if !(self.threshold_base > 0.0) {
            return Err(Error::Config("threshold_base must be positive".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("smoothing window must be >= 1".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        self.alpha * self.threshold_base
    }
}

/// Per-sensor mean absolute level, floored to [`EPS_FLOOR`].
pub fn sensor_scale(raw_sensors: &Matrix) -> Vec<f64> {
    let n = raw_sensors.rows() as f64;
    let mut acc = vec![0.0; raw_sensors.cols()];
    for r in raw_sensors.row_iter() {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v.abs();
        }
    }
    acc.into_iter().map(|a| floor_scale(a / n)).collect()
}

fn floor_scale(v: f64) -> f64 {
    if v < EPS_FLOOR {
        log::warn!("sensor scale {v:e} floored to {EPS_FLOOR:e}");
        EPS_FLOOR
    } else {
        v
    }
}

/// `r_ij = |x̂_ij − x_ij| / scale_j`, all in raw sensor units.
pub fn relative_residual(pred: &Matrix, actual: &Matrix, scale: &[f64]) -> Result<Matrix> {
    if pred.shape() != actual.shape() {
        return Err(Error::dim(
            "relative_residual",
            format!("{:?}", actual.shape()),
            format!("{:?}", pred.shape()),
        ));
    }
    if scale.len() != pred.cols() {
        return Err(Error::dim(
            "relative_residual scale",
            pred.cols(),
            scale.len(),
        ));
    }
    let scale: Vec<f64> = scale.iter().map(|&s| floor_scale(s)).collect();
    let mut out = pred.sub(actual)?;
    let k = out.cols();
    for row in out.as_mut_slice().chunks_exact_mut(k) {
        for (v, s) in row.iter_mut().zip(&scale) {
            *v = v.abs() / s;
        }
    }
    Ok(out)
}

pub fn anomaly_score(residual_row: &[f64], variant: ScoreVariant) -> f64 {
    let k = residual_row.len() as f64;
    let sum: f64 = residual_row.iter().sum();
    let second = match variant {
        ScoreVariant::MeanPlusMax => residual_row
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        ScoreVariant::MeanPlusSum => sum,
    };
    sum / k + second
}

pub fn anomaly_scores(residuals: &Matrix, variant: ScoreVariant) -> Vec<f64> {
    residuals
        .row_iter()
        .map(|r| anomaly_score(r, variant))
        .collect()
}

/// Windowed minimum over a stream. Once `window` values have been pushed,
/// each push yields the minimum of the latest `window` values, which is the
/// smoothed score of the row `window − 1` pushes back.
#[derive(Debug, Clone)]
pub struct SlidingMin {
    window: usize,
    pushed: usize,
    // (index, value) with strictly increasing values; front is the minimum
    candidates: VecDeque<(usize, f64)>,
}

impl SlidingMin {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config("smoothing window must be >= 1".into()));
        }
        Ok(SlidingMin {
            window,
            pushed: 0,
            candidates: VecDeque::with_capacity(window),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn push(&mut self, s: f64) -> Option<f64> {
        let i = self.pushed;
        self.pushed += 1;
        while self.candidates.back().is_some_and(|&(_, v)| v >= s) {
            self.candidates.pop_back();
        }
        self.candidates.push_back((i, s));
        if self.pushed < self.window {
            return None;
        }
        let start = self.pushed - self.window;
        while self.candidates.front().is_some_and(|&(j, _)| j < start) {
            self.candidates.pop_front();
        }
        self.candidates.front().map(|&(_, v)| v)
    }
}

/// Forward-looking windowed minimum: `out[i] = min(s[i..i+l])`.
/// Output length is `len(s) − l + 1`.
pub fn smooth_scores(scores: &[f64], window: usize) -> Result<Vec<f64>> {
    let mut min = SlidingMin::new(window)?;
    if scores.len() < window {
        return Err(Error::Usage(format!(
            "series of {} scores is shorter than the smoothing window {window}",
            scores.len()
        )));
    }
    Ok(scores.iter().filter_map(|&s| min.push(s)).collect())
}

/// `y_i = 1` iff `smoothed_i > alpha · base`.
pub fn detect(smoothed: &[f64], alpha: f64, threshold_base: f64) -> Vec<u8> {
    let threshold = alpha * threshold_base;
    smoothed.iter().map(|&s| u8::from(s > threshold)).collect()
}

/// Mean of the smoothed scores over healthy segments, each smoothed on its
/// own. Segments shorter than the window are skipped.
pub fn threshold_base(healthy_segments: &[Vec<f64>], window: usize) -> Result<f64> {
    threshold_base_with(healthy_segments, window, ThresholdStatistic::Mean)
}

pub fn threshold_base_with(
    healthy_segments: &[Vec<f64>],
    window: usize,
    statistic: ThresholdStatistic,
) -> Result<f64> {
    let mut total = 0.0;
    let mut max = f64::NEG_INFINITY;
    let mut count = 0usize;
    for seg in healthy_segments.iter().filter(|s| s.len() >= window) {
        let smoothed = smooth_scores(seg, window)?;
        total += smoothed.iter().sum::<f64>();
        max = smoothed.iter().copied().fold(max, f64::max);
        count += smoothed.len();
    }
    if count == 0 {
        return Err(Error::InsufficientData(
            "no healthy validation segment is as long as the smoothing window".into(),
        ));
    }
    let value = match statistic {
        ThresholdStatistic::Mean => total / count as f64,
        ThresholdStatistic::Max => max,
    };
    Ok(value.max(EPS_FLOOR))
}

/// Scores and decisions for one evaluated stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTrace {
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub labels: Vec<u8>,
    pub threshold: f64,
    /// Ground truth for the scored rows, when known.
    #[serde(default)]
    pub truth: Option<Vec<u8>>,
}

impl ScoreTrace {
    pub fn build(raw: Vec<f64>, cfg: &ScoringConfig, truth: Option<&[u8]>) -> Result<Self> {
        let smoothed = smooth_scores(&raw, cfg.window)?;
        let labels = detect(&smoothed, cfg.alpha, cfg.threshold_base);
        let truth = match truth {
            Some(t) if t.len() != raw.len() => {
                return Err(Error::dim("trace truth", raw.len(), t.len()))
            }
            Some(t) => Some(t[..smoothed.len()].to_vec()),
            None => None,
        };
        Ok(ScoreTrace {
            raw,
            smoothed,
            labels,
            threshold: cfg.threshold(),
            truth,
        })
    }

    /// Delimited text with columns `index,s_raw,s_smooth,threshold,label,truth`,
    /// one line per row that has a smoothed score.
    pub fn write_delimited<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,s_raw,s_smooth,threshold,label,truth")?;
        for i in 0..self.smoothed.len() {
            let truth = self
                .truth
                .as_ref()
                .map(|t| t[i].to_string())
                .unwrap_or_default();
            writeln!(
                out,
                "{i},{},{},{},{},{truth}",
                self.raw[i], self.smoothed[i], self.threshold, self.labels[i]
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_delimited(std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn residual_cases() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(
            relative_residual(&a, &a, &[1.0, 1.0]).unwrap(),
            Matrix::zeros(2, 2)
        );

        let scale = [0.5, 2.0];
        let shifted = m(&[&[1.5, 4.0], &[2.5, 2.0]]);
        let r = relative_residual(&shifted, &a, &scale).unwrap();
        assert!(r.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let pred = m(&[&[0.5, 2.0]]);
        let r = relative_residual(&pred, &Matrix::zeros(1, 2), &[1.0, 4.0]).unwrap();
        assert_eq!(r.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn residual_floors_zero_scale() {
        let r = relative_residual(&m(&[&[1e-9]]), &m(&[&[0.0]]), &[0.0]).unwrap();
        assert!((r[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn score_cases() {
        assert_eq!(
            anomaly_score(&[0.0, 0.0, 0.0], ScoreVariant::MeanPlusMax),
            0.0
        );
        assert_eq!(anomaly_score(&[0.7; 4], ScoreVariant::MeanPlusMax), 1.4);
        assert!((anomaly_score(&[0.1, 0.3], ScoreVariant::MeanPlusMax) - 0.5).abs() < 1e-15);
        assert!((anomaly_score(&[0.1, 0.3], ScoreVariant::MeanPlusSum) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn smoothing_cases() {
        let s = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(smooth_scores(&s, 1).unwrap(), s.to_vec());
        assert_eq!(smooth_scores(&[2.0; 6], 3).unwrap(), vec![2.0; 4]);
        assert_eq!(
            smooth_scores(&[1.0, 9.0, 1.0, 1.0], 2).unwrap(),
            vec![1.0, 1.0, 1.0]
        );
        assert!(matches!(smooth_scores(&[1.0], 2), Err(Error::Usage(_))));
    }

    #[test]
    fn detect_cases() {
        assert_eq!(detect(&[0.1, 0.2], 1.0, 1.0), vec![0, 0]);
        assert_eq!(detect(&[0.1, 0.2], 1e-12, 1.0), vec![1, 1]);
        assert_eq!(detect(&[0.4, 1.2], 1.0, 0.5), vec![0, 1]);
    }

    #[test]
    fn threshold_base_cases() {
        // perfect reconstruction
        assert_eq!(threshold_base(&[vec![0.0; 20]], 5).unwrap(), EPS_FLOOR);
        let seg = vec![0.5, 0.1, 0.9, 0.3, 0.7];
        // window 2 → [0.1, 0.1, 0.3, 0.3], mean 0.2
        assert!((threshold_base(std::slice::from_ref(&seg), 2).unwrap() - 0.2).abs() < 1e-15);
        let dup = threshold_base(&[seg.clone(), seg.clone()], 2).unwrap();
        assert_eq!(dup, threshold_base(&[seg], 2).unwrap());
        assert!(threshold_base(&[], 2).is_err());
    }

    #[test]
    fn trace_export() {
        let cfg = ScoringConfig {
            sensor_train_mean: vec![1.0],
            threshold_base: 0.5,
            statistic: ThresholdStatistic::Mean,
            window: 2,
            alpha: 1.0,
            variant: ScoreVariant::MeanPlusMax,
        };
        let trace = ScoreTrace::build(vec![0.1, 0.9, 0.8, 0.2], &cfg, Some(&[0, 1, 1, 0])).unwrap();
        assert_eq!(trace.labels, vec![0, 1, 0]);
        let mut buf = Vec::new();
        trace.write_delimited(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "index,s_raw,s_smooth,threshold,label,truth\n0,0.1,0.1,0.5,0,0\n1,0.9,0.8,0.5,1,1\n2,0.8,0.2,0.5,0,1\n"
        );
    }
}

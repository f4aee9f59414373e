//! Straight-line re-implementation of the residual scoring chain, written
//! with plain nested loops over `Vec<Vec<f64>>`.

pub struct Trace {
    pub raw: Vec<f64>,
    pub smooth: Vec<f64>,
    pub labels: Vec<u8>,
}

/// `pred`, `actual`: rows of sensor values; `scale`: per-sensor mean level.
pub fn score_chain(
    pred: &[Vec<f64>],
    actual: &[Vec<f64>],
    scale: &[f64],
    window: usize,
    alpha: f64,
    base: f64,
) -> Trace {
    let mut raw = Vec::new();
    for i in 0..pred.len() {
        let k = scale.len();
        let mut total = 0.0;
        let mut biggest = f64::NEG_INFINITY;
        for j in 0..k {
            let r = (pred[i][j] - actual[i][j]).abs() / scale[j];
            total += r;
            if r > biggest {
                biggest = r;
            }
        }
        raw.push(total / k as f64 + biggest);
    }
    let mut smooth = Vec::new();
    let mut i = 0;
    while i + window <= raw.len() {
        let mut lowest = raw[i];
        for q in 1..window {
            if raw[i + q] < lowest {
                lowest = raw[i + q];
            }
        }
        smooth.push(lowest);
        i += 1;
    }
    let threshold = alpha * base;
    let labels = smooth
        .iter()
        .map(|&s| if s > threshold { 1 } else { 0 })
        .collect();
    Trace {
        raw,
        smooth,
        labels,
    }
}

pub struct Instance {
    pub pred: Vec<Vec<f64>>,
    pub actual: Vec<Vec<f64>>,
    pub scale: Vec<f64>,
    pub window: usize,
    pub alpha: f64,
    pub base: f64,
}

/// A random scoring problem: 1–8 sensors, window 1–10, at least `window` rows.
pub fn random_instance<R: rand::Rng>(rng: &mut R) -> Instance {
    let k = rng.random_range(1..=8);
    let window = rng.random_range(1..=10);
    let n = rng.random_range(window..=window + 60);
    let mut row =
        |lo: f64, hi: f64| -> Vec<f64> { (0..k).map(|_| rng.random_range(lo..hi)).collect() };
    let pred: Vec<Vec<f64>> = (0..n).map(|_| row(-5.0, 5.0)).collect();
    let actual: Vec<Vec<f64>> = (0..n).map(|_| row(-5.0, 5.0)).collect();
    let scale = row(0.1, 3.0);
    Instance {
        pred,
        actual,
        scale,
        window,
        alpha: rng.random_range(0.5..2.0),
        base: rng.random_range(0.5..6.0),
    }
}

/// The same chain through the library.
pub fn library_chain(inst: &Instance) -> Trace {
    use tard_core::detection::{
        anomaly_scores, detect, relative_residual, smooth_scores, ScoreVariant,
    };
    use tard_core::netcore::Matrix;
    let pred = Matrix::from_rows(&inst.pred).unwrap();
    let actual = Matrix::from_rows(&inst.actual).unwrap();
    let r = relative_residual(&pred, &actual, &inst.scale).unwrap();
    let raw = anomaly_scores(&r, ScoreVariant::MeanPlusMax);
    let smooth = smooth_scores(&raw, inst.window).unwrap();
    let labels = detect(&smooth, inst.alpha, inst.base);
    Trace {
        raw,
        smooth,
        labels,
    }
}

/// Largest absolute difference between two traces; labels must agree.
pub fn trace_gap(a: &Trace, b: &Trace) -> Option<f64> {
    if a.raw.len() != b.raw.len() || a.smooth.len() != b.smooth.len() || a.labels != b.labels {
        return None;
    }
    let gap = a
        .raw
        .iter()
        .zip(&b.raw)
        .chain(a.smooth.iter().zip(&b.smooth))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Some(gap)
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::dim("metric inputs", b, a));
    }
    if a == 0 {
        return Err(Error::InsufficientData(
            "metrics need at least one sample".into(),
        ));
    }
    Ok(())
}

/// Positive class is 1 (fault).
pub fn confusion(labels: &[u8], truth: &[u8]) -> Result<Confusion> {
    same_len(labels.len(), truth.len())?;
    let mut c = Confusion::default();
    for (&y, &t) in labels.iter().zip(truth) {
        match (y != 0, t != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn accuracy(labels: &[u8], truth: &[u8]) -> Result<f64> {
    let c = confusion(labels, truth)?;
    Ok((c.tp + c.tn) as f64 / c.total() as f64)
}

/// `2PR / (P + R)`, zero when `P + R = 0`.
pub fn f1_score(labels: &[u8], truth: &[u8]) -> Result<f64> {
    let c = confusion(labels, truth)?;
    let p = if c.tp + c.fp == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let r = if c.tp + c.fn_ == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    Ok(if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    })
}

/// Fraction of healthy samples labeled faulty; zero when there are none.
pub fn false_alarm_rate(labels: &[u8], truth: &[u8]) -> Result<f64> {
    let c = confusion(labels, truth)?;
    Ok(if c.fp + c.tn == 0 {
        0.0
    } else {
        c.fp as f64 / (c.fp + c.tn) as f64
    })
}

/// Area under the ROC curve as the Mann–Whitney statistic with mid-ranks
/// for ties.
pub fn auc(scores: &[f64], truth: &[u8]) -> Result<f64> {
    same_len(scores.len(), truth.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedAuc("scores contain NaN".into()));
    }
    let n_pos = truth.iter().filter(|&&t| t != 0).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc("truth contains a single class".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        pos_rank_sum += mid * order[i..=j].iter().filter(|&&k| truth[k] != 0).count() as f64;
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

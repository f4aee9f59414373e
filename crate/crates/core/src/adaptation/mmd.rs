use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::Matrix;

/// Which activations the discrepancy penalty is applied to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentLayer {
    /// Encoder output (the latent code).
    #[default]
    Latent,
}

/// Multi-kernel RBF discrepancy settings. Kernel bandwidths are
/// `multiplier × median pairwise distance` of the pooled rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmdConfig {
    pub bandwidth_multipliers: Vec<f64>,
    pub lambda: f64,
    pub layer: AlignmentLayer,
}

impl Default for MmdConfig {
    fn default() -> Self {
        MmdConfig {
            bandwidth_multipliers: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            lambda: 1.0,
            layer: AlignmentLayer::Latent,
        }
    }
}

impl MmdConfig {
    /// `lambda = 0` is accepted and disables the penalty.
    pub fn validate(&self) -> Result<()> {
        if self.bandwidth_multipliers.is_empty() {
            return Err(Error::Config("mmd needs at least one bandwidth".into()));
        }
        if self
            .bandwidth_multipliers
            .iter()
            .any(|&b| !(b > 0.0) || !b.is_finite())
        {
            return Err(Error::Config("mmd bandwidths must be positive".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config("mmd lambda must be non-negative".into()));
        }
        Ok(())
    }

    /// Absolute bandwidths for a given source/target pair.
    pub fn bandwidths(&self, a: &Matrix, b: &Matrix) -> Vec<f64> {
        let med = median_pairwise_distance(a, b);
        self.bandwidth_multipliers.iter().map(|m| m * med).collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median Euclidean distance over all unordered pairs of the pooled rows.
/// Falls back to 1 when every pooled row coincides.
pub fn median_pairwise_distance(a: &Matrix, b: &Matrix) -> f64 {
    let rows: Vec<&[f64]> = a.row_iter().chain(b.row_iter()).collect();
    let mut d = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            d.push(sq_dist(rows[i], rows[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let med = if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    };
    if med > 1e-12 {
        med
    } else {
        1.0
    }
}

fn kernel(sq: f64, sigmas: &[f64]) -> f64 {
    sigmas
        .iter()
        .map(|s| (-sq / (2.0 * s * s)).exp())
        .sum::<f64>()
        / sigmas.len() as f64
}

/// `Σ_σ k_σ(d²) / σ²` averaged over kernels; the factor in `∂k/∂u = −(u − v)·…`.
fn kernel_slope(sq: f64, sigmas: &[f64]) -> f64 {
    sigmas
        .iter()
        .map(|s| (-sq / (2.0 * s * s)).exp() / (s * s))
        .sum::<f64>()
        / sigmas.len() as f64
}

fn check(a: &Matrix, b: &Matrix, min_rows: usize, sigmas: &[f64]) -> Result<()> {
    if a.cols() != b.cols() {
        return Err(Error::dim("mmd feature width", a.cols(), b.cols()));
    }
    if a.rows() < min_rows || b.rows() < min_rows {
        return Err(Error::Estimator(format!(
            "mmd needs at least {min_rows} rows per sample, got {} and {}",
            a.rows(),
            b.rows()
        )));
    }
    if sigmas.is_empty() || sigmas.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Config("mmd bandwidths must be positive".into()));
    }
    Ok(())
}

/// Cross-term pairs `(i, j)` and their weight. With equal sample sizes the
/// diagonal `i = j` is excluded, so identical samples score exactly zero.
fn cross_pairs(a: &Matrix, b: &Matrix) -> (bool, f64) {
    let (m, n) = (a.rows() as f64, b.rows() as f64);
    if a.rows() == b.rows() {
        (true, 2.0 / (m * (m - 1.0)))
    } else {
        (false, 2.0 / (m * n))
    }
}

/// Unbiased MMD² with the kernel averaged over `sigmas`. May be slightly
/// negative.
pub fn mmd_unbiased(a: &Matrix, b: &Matrix, sigmas: &[f64]) -> Result<f64> {
    check(a, b, 2, sigmas)?;
    let (m, n) = (a.rows() as f64, b.rows() as f64);
    let (skip_diag, cross_coef) = cross_pairs(a, b);
    let within = |x: &Matrix| {
        let mut s = 0.0;
        for i in 0..x.rows() {
            for j in i + 1..x.rows() {
                s += kernel(sq_dist(x.row(i), x.row(j)), sigmas);
            }
        }
        2.0 * s
    };
    let mut cross = 0.0;
    for (i, ra) in a.row_iter().enumerate() {
        for (j, rb) in b.row_iter().enumerate() {
            if !(skip_diag && i == j) {
                cross += kernel(sq_dist(ra, rb), sigmas);
            }
        }
    }
    Ok(within(a) / (m * (m - 1.0)) + within(b) / (n * (n - 1.0)) - cross_coef * cross)
}

/// Biased (V-statistic) MMD²; defined for single rows.
pub fn mmd_biased(a: &Matrix, b: &Matrix, sigmas: &[f64]) -> Result<f64> {
    check(a, b, 1, sigmas)?;
    let mean_k = |x: &Matrix, y: &Matrix| {
        let mut s = 0.0;
        for rx in x.row_iter() {
            for ry in y.row_iter() {
                s += kernel(sq_dist(rx, ry), sigmas);
            }
        }
        s / (x.rows() * y.rows()) as f64
    };
    Ok(mean_k(a, a) + mean_k(b, b) - 2.0 * mean_k(a, b))
}

/// Unbiased multi-kernel MMD² with median-heuristic bandwidths.
pub fn mmd_loss(source_latent: &Matrix, target_latent: &Matrix, cfg: &MmdConfig) -> Result<f64> {
    cfg.validate()?;
    mmd_unbiased(
        source_latent,
        target_latent,
        &cfg.bandwidths(source_latent, target_latent),
    )
}

/// Unbiased MMD² and its gradients with respect to both inputs, bandwidths
/// held fixed.
pub fn mmd_with_grad(a: &Matrix, b: &Matrix, sigmas: &[f64]) -> Result<(f64, Matrix, Matrix)> {
    let value = mmd_unbiased(a, b, sigmas)?;
    let (m, n) = (a.rows() as f64, b.rows() as f64);
    let d = a.cols();
    let mut ga = Matrix::zeros(a.rows(), d);
    let mut gb = Matrix::zeros(b.rows(), d);

    // within-sample pairs: each unordered pair appears twice in the sum
    let within = |x: &Matrix, g: &mut Matrix, coef: f64| {
        for i in 0..x.rows() {
            for j in i + 1..x.rows() {
                let (ri, rj) = (x.row(i), x.row(j));
                let w = coef * kernel_slope(sq_dist(ri, rj), sigmas);
                for c in 0..d {
                    let diff = ri[c] - rj[c];
                    g.row_mut(i)[c] -= w * diff;
                    g.row_mut(j)[c] += w * diff;
                }
            }
        }
    };
    within(a, &mut ga, 2.0 / (m * (m - 1.0)));
    within(b, &mut gb, 2.0 / (n * (n - 1.0)));

    let (skip_diag, coef) = cross_pairs(a, b);
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            if skip_diag && i == j {
                continue;
            }
            let (ri, rj) = (a.row(i), b.row(j));
            let w = coef * kernel_slope(sq_dist(ri, rj), sigmas);
            for c in 0..d {
                let diff = ri[c] - rj[c];
                ga.row_mut(i)[c] += w * diff;
                gb.row_mut(j)[c] -= w * diff;
            }
        }
    }
    Ok((value, ga, gb))
}

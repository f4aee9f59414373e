use super::matrix::Matrix;
use crate::error::{Error, Result};

fn check_shapes(pred: &Matrix, target: &Matrix) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::dim(
            "mse_loss",
            format!("{:?}", target.shape()),
            format!("{:?}", pred.shape()),
        ));
    }
    Ok(())
}

/// Mean squared error over all `rows × cols` entries.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<f64> {
    check_shapes(pred, target)?;
    let n = pred.as_slice().len() as f64;
    let sum: f64 = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / n)
}

/// Gradient of [`mse_loss`] with respect to `pred`: `2 (pred − target) / (n·k)`.
pub fn mse_grad(pred: &Matrix, target: &Matrix) -> Result<Matrix> {
    check_shapes(pred, target)?;
    let scale = 2.0 / pred.as_slice().len() as f64;
    pred.zip_map(target, |p, t| scale * (p - t))
}

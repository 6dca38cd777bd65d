use ndarray::{Array2, Array3, Axis};

use crate::error::{invalid, shape_err, Result};

fn check(pred: &Array2<f64>, target: &Array2<f64>, mask: &[f64]) -> Result<usize> {
    if pred.dim() != target.dim() || mask.len() != pred.nrows() {
        return Err(shape_err(format!(
            "masked mse: pred {:?}, target {:?}, mask {}",
            pred.dim(),
            target.dim(),
            mask.len()
        )));
    }
    let active = mask.iter().filter(|m| **m != 0.0).count();
    if active == 0 {
        return Err(invalid("mask selects no frames"));
    }
    Ok(active)
}

/// Mean squared error over frames with a non-zero mask and all coordinates.
pub fn masked_mse(pred: &Array2<f64>, target: &Array2<f64>, mask: &[f64]) -> Result<f64> {
    masked_mse_grad(pred, target, mask).map(|(l, _)| l)
}

/// Loss and its gradient with respect to `pred`.
pub fn masked_mse_grad(
    pred: &Array2<f64>,
    target: &Array2<f64>,
    mask: &[f64],
) -> Result<(f64, Array2<f64>)> {
    let active = check(pred, target, mask)?;
    let denom = (active * pred.ncols()) as f64;
    let mut grad = Array2::zeros(pred.raw_dim());
    let mut loss = 0.0;
    for (t, &m) in mask.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for d in 0..pred.ncols() {
            let diff = pred[[t, d]] - target[[t, d]];
            loss += diff * diff;
            grad[[t, d]] = 2.0 * diff / denom;
        }
    }
    Ok((loss / denom, grad))
}

/// Batched form over `T × B × D` tensors with a `T × B` mask.
pub fn masked_mse_batch(
    pred: &Array3<f64>,
    target: &Array3<f64>,
    mask: &Array2<f64>,
) -> Result<(f64, Array3<f64>)> {
    let (steps, batch, dim) = pred.dim();
    if target.dim() != pred.dim() || mask.dim() != (steps, batch) {
        return Err(shape_err("masked mse batch shapes disagree"));
    }
    let active = mask.iter().filter(|m| **m != 0.0).count();
    if active == 0 {
        return Err(invalid("mask selects no frames"));
    }
    let denom = (active * dim) as f64;
    let mut grad = Array3::zeros(pred.raw_dim());
    let mut loss = 0.0;
    for t in 0..steps {
        let (p, y) = (pred.index_axis(Axis(0), t), target.index_axis(Axis(0), t));
        let mut g = grad.index_axis_mut(Axis(0), t);
        for b in 0..batch {
            if mask[[t, b]] == 0.0 {
                continue;
            }
            for d in 0..dim {
                let diff = p[[b, d]] - y[[b, d]];
                loss += diff * diff;
                g[[b, d]] = 2.0 * diff / denom;
            }
        }
    }
    Ok((loss / denom, grad))
}

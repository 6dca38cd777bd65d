use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{invalid, shape_err, NvxError, Result};

/// Closed-form ridge fit `Y ≈ X·B` without intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    /// `p × q`.
    pub coef: Array2<f64>,
    /// Mean squared residual over all entries of `Y`.
    pub residual: f64,
}

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Solves `(XᵀX + λI) B = XᵀY`.
pub fn ridge_oracle(x: &Array2<f64>, y: &Array2<f64>, lambda: f64) -> Result<RidgeFit> {
    if x.nrows() != y.nrows() || x.nrows() == 0 {
        return Err(shape_err(format!("ridge: X has {} rows, Y has {}", x.nrows(), y.nrows())));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid("ridge lambda must be finite and non-negative"));
    }
    let xn = to_na(x);
    let mut gram = xn.transpose() * &xn;
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let rhs = xn.transpose() * to_na(y);
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| NvxError::Singular("normal equations are not positive definite".into()))?;
    let diag = chol.l().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if lo <= hi * 1e-10 {
        return Err(NvxError::Singular(format!("normal equations are ill-conditioned (λ = {lambda})")));
    }
    let b = chol.solve(&rhs);
    let coef = Array2::from_shape_fn((b.nrows(), b.ncols()), |(i, j)| b[(i, j)]);
    let resid = y - &x.dot(&coef);
    let residual = resid.mapv(|v| v * v).mean().unwrap_or(0.0);
    Ok(RidgeFit { coef, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorgrad::seeded_rng;
    use rand::Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeded_rng(seed);
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn realizable_target() {
        let x = random(50, 4, 1);
        let b = random(4, 3, 2);
        let fit = ridge_oracle(&x, &x.dot(&b), 1e-12).unwrap();
        assert!(fit.residual <= 1e-8);
        assert!((&fit.coef - &b).mapv(f64::abs).iter().all(|d| *d < 1e-6));
    }

    #[test]
    fn pure_noise_leaves_its_variance() {
        let x = random(4000, 3, 3);
        let y = random(4000, 2, 4);
        let var = y.mapv(|v| v * v).mean().unwrap();
        let fit = ridge_oracle(&x, &y, 1e-6).unwrap();
        assert!((fit.residual - var).abs() <= 0.1 * var);
    }

    #[test]
    fn coefficients_shrink_with_lambda() {
        let x = random(30, 5, 5);
        let y = random(30, 2, 6);
        let mut last = f64::INFINITY;
        for lambda in [0.0, 0.1, 1.0, 10.0, 100.0, 1e4] {
            let norm = ridge_oracle(&x, &y, lambda).unwrap().coef.mapv(|v| v * v).sum();
            assert!(norm < last);
            last = norm;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn singular_without_regularization() {
        let mut x = random(10, 3, 7);
        let col = x.column(0).to_owned();
        x.column_mut(2).assign(&col);
        assert!(matches!(ridge_oracle(&x, &random(10, 1, 8), 0.0), Err(NvxError::Singular(_))));
        assert!(ridge_oracle(&x, &random(10, 1, 8), 0.5).is_ok());
        assert!(ridge_oracle(&x, &random(9, 1, 8), 0.5).is_err());
    }
}

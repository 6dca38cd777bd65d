//! Kernel PCA for EEG feature frames.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, NvxError, Result};

/// Reduced widths of EEG feature sets 1, 2 and 3.
pub const FEATURE_SET_COMPONENTS: [usize; 3] = [30, 50, 93];
const EIGEN_CUTOFF: f64 = 1e-12;

pub fn feature_set_components(set: u8) -> Result<usize> {
    match set {
        1..=3 => Ok(FEATURE_SET_COMPONENTS[set as usize - 1]),
        _ => Err(invalid(format!("feature set {set} is not 1, 2 or 3"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Rbf { gamma: f64 },
    Linear,
}

impl Kernel {
    /// RBF with `gamma = 1 / (D · mean per-dimension variance)`.
    pub fn default_rbf(x: &Array2<f64>) -> Kernel {
        let d = x.ncols().max(1) as f64;
        let var = x.var_axis(Axis(0), 0.0).mean().unwrap_or(0.0);
        let gamma = if var > 0.0 { 1.0 / (d * var) } else { 1.0 / d };
        Kernel::Rbf { gamma }
    }

    /// Gram block `k(a_i, b_j)`.
    pub fn matrix(&self, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
        let dot = a.dot(&b.t());
        match *self {
            Kernel::Linear => dot,
            Kernel::Rbf { gamma } => {
                let na: Array1<f64> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
                let nb: Array1<f64> = b.rows().into_iter().map(|r| r.dot(&r)).collect();
                let mut k = dot;
                for ((i, j), v) in k.indexed_iter_mut() {
                    let d2 = (na[i] + nb[j] - 2.0 * *v).max(0.0);
                    *v = (-gamma * d2).exp();
                }
                k
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpcaModel {
    training_frames: Array2<f64>,
    kernel: Kernel,
    /// `N × m`, column `j` is the unit eigenvector divided by `√λ_j`.
    centered_eigenvectors: Array2<f64>,
    eigenvalues: Vec<f64>,
    /// Column means of the uncentered training Gram matrix.
    gram_col_means: Array1<f64>,
}

impl KpcaModel {
    /// Rebuilds a model from stored parts, recomputing the centering terms.
    pub fn from_parts(
        training_frames: Array2<f64>,
        kernel: Kernel,
        centered_eigenvectors: Array2<f64>,
        eigenvalues: Vec<f64>,
    ) -> Result<Self> {
        let m = eigenvalues.len();
        if m == 0 || centered_eigenvectors.dim() != (training_frames.nrows(), m) {
            return Err(shape_err("kpca parts have inconsistent shapes"));
        }
        if eigenvalues.iter().any(|l| !(*l > 0.0)) || eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(invalid("kpca eigenvalues must be positive and descending"));
        }
        let gram = kernel.matrix(training_frames.view(), training_frames.view());
        let gram_col_means = gram.mean_axis(Axis(0)).expect("non-empty");
        Ok(Self { training_frames, kernel, centered_eigenvectors, eigenvalues, gram_col_means })
    }

    pub fn training_frames(&self) -> &Array2<f64> {
        &self.training_frames
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn centered_eigenvectors(&self) -> &Array2<f64> {
        &self.centered_eigenvectors
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn input_dim(&self) -> usize {
        self.training_frames.ncols()
    }

    /// Unit-norm eigenvectors of the centered Gram matrix, `N × m`.
    pub fn unit_eigenvectors(&self) -> Array2<f64> {
        let scale = Array1::from_iter(self.eigenvalues.iter().map(|l| l.sqrt()));
        &self.centered_eigenvectors * &scale
    }
}

fn double_center(k: &mut Array2<f64>) -> Array1<f64> {
    let col = k.mean_axis(Axis(0)).expect("non-empty");
    let grand = col.mean().expect("non-empty");
    let n = k.nrows();
    for i in 0..n {
        for j in 0..n {
            // The Gram matrix is symmetric, so row means equal column means.
            k[[i, j]] += grand - col[i] - col[j];
        }
    }
    col
}

pub fn kpca_fit(x: &Array2<f64>, kernel: Kernel, n_components: usize) -> Result<KpcaModel> {
    let n = x.nrows();
    if n_components == 0 || n < n_components {
        return Err(invalid(format!("kpca needs 1 ≤ n_components ≤ N, got {n_components} with N = {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NvxError::NonFinite("kpca input"));
    }
    if let Kernel::Rbf { gamma } = kernel {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("rbf gamma must be positive"));
        }
    }
    let mut k = kernel.matrix(x.view(), x.view());
    let gram_col_means = double_center(&mut k);
    let eig = SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| k[[i, j]]));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]];
    let achievable = order.iter().take_while(|&&i| top > 0.0 && eig.eigenvalues[i] > EIGEN_CUTOFF * top).count();
    if achievable < n_components {
        return Err(NvxError::RankDeficient { requested: n_components, achievable });
    }
    let mut vectors = Array2::zeros((n, n_components));
    let mut values = Vec::with_capacity(n_components);
    for (c, &i) in order.iter().take(n_components).enumerate() {
        let lambda = eig.eigenvalues[i];
        let v = eig.eigenvectors.column(i);
        // Sign convention: the largest-magnitude entry is positive.
        let pivot = v.iter().copied().fold(0.0f64, |acc, e| if e.abs() > acc.abs() { e } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        let scale = sign / lambda.sqrt();
        for r in 0..n {
            vectors[[r, c]] = v[r] * scale;
        }
        values.push(lambda);
    }
    Ok(KpcaModel {
        training_frames: x.clone(),
        kernel,
        centered_eigenvectors: vectors,
        eigenvalues: values,
        gram_col_means,
    })
}

/// Out-of-sample projection, `M × m`.
pub fn kpca_transform(model: &KpcaModel, y: &Array2<f64>) -> Result<Array2<f64>> {
    if y.ncols() != model.input_dim() {
        return Err(shape_err(format!("kpca was fit on {} features, got {}", model.input_dim(), y.ncols())));
    }
    let mut k = model.kernel.matrix(y.view(), model.training_frames.view());
    let grand = model.gram_col_means.mean().expect("non-empty");
    for mut row in k.rows_mut() {
        let row_mean = row.mean().expect("non-empty");
        row.zip_mut_with(&model.gram_col_means, |v, c| *v += grand - row_mean - c);
    }
    Ok(k.dot(&model.centered_eigenvectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorgrad::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeded_rng(seed);
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
    }

    /// Classical PCA scores from the eigendecomposition of the centered covariance.
    fn pca_scores(x: &Array2<f64>, m: usize) -> Array2<f64> {
        let mean = x.mean_axis(Axis(0)).unwrap();
        let xc = x - &mean;
        let cov = xc.t().dot(&xc) / x.nrows() as f64;
        let d = cov.nrows();
        let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let u = Array2::from_shape_fn((d, m), |(r, c)| eig.eigenvectors[(r, order[c])]);
        xc.dot(&u)
    }

    fn max_abs_diff_up_to_sign(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        let mut worst = 0.0f64;
        for (ca, cb) in a.columns().into_iter().zip(b.columns()) {
            let plus = (&ca - &cb).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
            let minus = (&ca + &cb).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
            worst = worst.max(plus.min(minus));
        }
        worst
    }

    #[test]
    fn linear_kernel_matches_pca() {
        for seed in 0..5 {
            let x = random(20, 5, seed);
            let model = kpca_fit(&x, Kernel::Linear, 5).unwrap();
            let scores = kpca_transform(&model, &x).unwrap();
            assert!(max_abs_diff_up_to_sign(&scores, &pca_scores(&x, 5)) <= 1e-8);
        }
    }

    #[test]
    fn eigenvalues_positive_descending() {
        let model = kpca_fit(&random(40, 6, 1), Kernel::default_rbf(&random(40, 6, 1)), 12).unwrap();
        assert_eq!(model.n_components(), 12);
        assert!(model.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        assert!(model.eigenvalues().iter().all(|l| *l > 0.0));
    }

    #[test]
    fn feature_set_widths() {
        assert_eq!(feature_set_components(1).unwrap(), 30);
        assert_eq!(feature_set_components(2).unwrap(), 50);
        assert_eq!(feature_set_components(3).unwrap(), 93);
        assert!(feature_set_components(4).is_err());
        let x = random(120, 93, 2);
        for set in 1..=3 {
            let m = feature_set_components(set).unwrap();
            let model = kpca_fit(&x, Kernel::default_rbf(&x), m).unwrap();
            assert_eq!(kpca_transform(&model, &x).unwrap().ncols(), m);
        }
    }

    #[test]
    fn maximal_component_count() {
        let x = random(8, 3, 4);
        let model = kpca_fit(&x, Kernel::default_rbf(&x), 7).unwrap();
        assert_eq!(model.n_components(), 7);
        // Centering removes one direction, so N components is one too many.
        assert!(matches!(
            kpca_fit(&x, Kernel::default_rbf(&x), 8),
            Err(NvxError::RankDeficient { requested: 8, achievable: 7 })
        ));
    }

    #[test]
    fn rank_deficiency_names_achievable_rank() {
        let x = random(30, 3, 5);
        match kpca_fit(&x, Kernel::Linear, 5) {
            Err(NvxError::RankDeficient { requested, achievable }) => assert_eq!((requested, achievable), (5, 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fit_and_transform_agree() {
        let x = random(25, 4, 6);
        let model = kpca_fit(&x, Kernel::default_rbf(&x), 6).unwrap();
        let scores = kpca_transform(&model, &x).unwrap();
        // Fit-time scores are the unit eigenvectors scaled by √λ.
        let fit = model.unit_eigenvectors() * &Array1::from_iter(model.eigenvalues().iter().map(|l| l.sqrt()));
        assert!((&scores - &fit).mapv(f64::abs).iter().all(|d| *d <= 1e-10));
        let row = x.slice(ndarray::s![3..4, ..]).to_owned();
        let one = kpca_transform(&model, &row).unwrap();
        assert_eq!(one.dim(), (1, 6));
        assert!((&one.row(0) - &scores.row(3)).mapv(f64::abs).iter().all(|d| *d <= 1e-10));
        assert!(kpca_transform(&model, &random(2, 5, 0)).is_err());
    }

    #[test]
    fn rebuild_from_parts() {
        let x = random(15, 4, 7);
        let model = kpca_fit(&x, Kernel::default_rbf(&x), 5).unwrap();
        let again = KpcaModel::from_parts(
            model.training_frames().clone(),
            model.kernel(),
            model.centered_eigenvectors().clone(),
            model.eigenvalues().to_vec(),
        )
        .unwrap();
        let q = random(3, 4, 8);
        assert_eq!(kpca_transform(&model, &q).unwrap(), kpca_transform(&again, &q).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn gram_space_orthonormality(n in 6usize..30, d in 2usize..8, seed in 0u64..1000, linear in any::<bool>()) {
            let x = random(n, d, seed);
            let kernel = if linear { Kernel::Linear } else { Kernel::default_rbf(&x) };
            let m = if linear { d.min(n - 1) } else { (n / 2).max(1) };
            let model = kpca_fit(&x, kernel, m).unwrap();
            let mut k = kernel.matrix(x.view(), x.view());
            double_center(&mut k);
            let v = model.unit_eigenvectors();
            let proj = v.t().dot(&k).dot(&v);
            for i in 0..m {
                for j in 0..m {
                    let expected = if i == j { model.eigenvalues()[i] } else { 0.0 };
                    prop_assert!((proj[[i, j]] - expected).abs() <= 1e-8 * model.eigenvalues()[0].max(1.0));
                }
            }
        }

        #[test]
        fn linear_kpca_is_pca(n in 6usize..50, d in 1usize..10, seed in 0u64..1000) {
            let x = random(n, d, seed);
            let m = d.min(n - 1);
            let model = kpca_fit(&x, Kernel::Linear, m).unwrap();
            let scores = kpca_transform(&model, &x).unwrap();
            prop_assert!(max_abs_diff_up_to_sign(&scores, &pca_scores(&x, m)) <= 1e-8);
        }

        #[test]
        fn rbf_shift_invariance(seed in 0u64..1000, shift in -5.0f64..5.0) {
            let x = random(20, 4, seed);
            let y = random(5, 4, seed + 1);
            let kernel = Kernel::default_rbf(&x);
            let a = kpca_transform(&kpca_fit(&x, kernel, 6).unwrap(), &y).unwrap();
            let xs = &x + shift;
            let ys = &y + shift;
            let b = kpca_transform(&kpca_fit(&xs, kernel, 6).unwrap(), &ys).unwrap();
            prop_assert!(max_abs_diff_up_to_sign(&a, &b) <= 1e-9);
        }
    }
}

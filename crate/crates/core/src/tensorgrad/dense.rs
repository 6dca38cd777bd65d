use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{glorot_uniform, mat_slice, mat_slice_mut, row_vector, vec_slice, vec_slice_mut, ParamTensors, SeededRng};
use crate::error::{shape_err, Result};

/// Linear layer `y = W x + b`, `W` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl DenseParams {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self { w: Array2::zeros((output_dim, input_dim)), b: Array1::zeros(output_dim) }
    }

    pub fn glorot(input_dim: usize, output_dim: usize, rng: &mut SeededRng) -> Self {
        Self { w: glorot_uniform(output_dim, input_dim, rng), b: Array1::zeros(output_dim) }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }
}

impl ParamTensors for DenseParams {
    fn tensors(&self) -> Vec<(String, usize, usize, &[f64])> {
        vec![
            ("w".to_string(), self.w.nrows(), self.w.ncols(), mat_slice(&self.w)),
            ("b".to_string(), 1, self.b.len(), vec_slice(&self.b)),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![mat_slice_mut(&mut self.w), vec_slice_mut(&mut self.b)]
    }
}

/// Rows of `x` through the layer (time-distributed application).
pub fn dense_forward_batch(p: &DenseParams, x: ArrayView2<f64>) -> Array2<f64> {
    x.dot(&p.w.t()) + &p.b
}

/// Accumulates parameter gradients and returns `dx`.
pub fn dense_backward_batch(
    p: &DenseParams,
    x: ArrayView2<f64>,
    dy: &Array2<f64>,
    grads: &mut DenseParams,
) -> Array2<f64> {
    grads.w += &dy.t().dot(&x);
    grads.b += &dy.sum_axis(Axis(0));
    dy.dot(&p.w)
}

pub fn dense(w: &Array2<f64>, b: &Array1<f64>, x: &Array1<f64>) -> Result<Array1<f64>> {
    if w.ncols() != x.len() || w.nrows() != b.len() {
        return Err(shape_err(format!(
            "dense W {:?} incompatible with input {} and bias {}",
            w.dim(),
            x.len(),
            b.len()
        )));
    }
    Ok(w.dot(x) + b)
}

/// Gradients of `⟨dy, dense(w, b, x)⟩`: `(dW, db, dx)`.
pub fn dense_backward(
    w: &Array2<f64>,
    b: &Array1<f64>,
    x: &Array1<f64>,
    dy: &Array1<f64>,
) -> Result<(Array2<f64>, Array1<f64>, Array1<f64>)> {
    dense(w, b, x)?;
    if dy.len() != w.nrows() {
        return Err(shape_err("upstream gradient length differs from output size"));
    }
    let p = DenseParams { w: w.clone(), b: b.clone() };
    let mut g = DenseParams::zeros(w.ncols(), w.nrows());
    let dx = dense_backward_batch(&p, row_vector(x), &row_vector(dy).to_owned(), &mut g);
    Ok((g.w, g.b, dx.row(0).to_owned()))
}

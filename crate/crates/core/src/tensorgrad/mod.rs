//! Differentiable building blocks for the regression networks.
//!
//! Every op comes as a batched forward/backward pair working on `B × dim`
//! matrices (one row per sequence in the batch) plus a single-vector
//! convenience form. Backward passes are derived by hand and checked against
//! central finite differences in [`check`].
//!
//! All math is `f64`. Randomness (initialization, dropout) comes from
//! [`SeededRng`], a ChaCha8 stream, so results reproduce across platforms.

mod adam;
mod attention;
pub mod check;
mod dense;
mod dropout;
mod gru;
mod loss;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use attention::{
    attention_backward_batch, attention_forward_batch, attention_step, attention_step_backward,
    AttentionCache, AttentionGrads,
};
pub use dense::{dense, dense_backward, dense_backward_batch, dense_forward_batch, DenseParams};
pub use dropout::{dropout, dropout_mask};
pub use gru::{
    gru_backward_batch, gru_cell, gru_cell_backward, gru_forward_batch, GruCache, GruParams,
};
pub use loss::{masked_mse, masked_mse_batch, masked_mse_grad};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense row-major `f64` matrix.
pub type Tensor2 = Array2<f64>;

/// Portable seeded generator used for initialization and dropout masks.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Glorot/Xavier uniform matrix of shape `rows × cols` (fan-out × fan-in).
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut SeededRng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn row_vector(v: &Array1<f64>) -> ArrayView2<'_, f64> {
    v.view().insert_axis(Axis(0))
}

/// A set of named parameter tensors that can be flattened for the optimizer
/// and serialized record by record.
pub trait ParamTensors {
    /// `(name, rows, cols, values)` in a fixed order.
    fn tensors(&self) -> Vec<(String, usize, usize, &[f64])>;

    /// Mutable views, same order as [`ParamTensors::tensors`].
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.3.len()).sum()
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (_, _, _, v) in self.tensors() {
            out.extend_from_slice(v);
        }
        out
    }

    /// Overwrite every parameter from a flat buffer of exactly `param_count` values.
    fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length");
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.3.iter().all(|v| v.is_finite()))
    }
}

pub(crate) fn mat_slice<'a>(m: &'a Array2<f64>) -> &'a [f64] {
    m.as_slice().expect("parameters are stored in standard layout")
}

pub(crate) fn mat_slice_mut(m: &mut Array2<f64>) -> &mut [f64] {
    m.as_slice_mut().expect("parameters are stored in standard layout")
}

pub(crate) fn vec_slice(v: &Array1<f64>) -> &[f64] {
    v.as_slice().expect("parameters are stored in standard layout")
}

pub(crate) fn vec_slice_mut(v: &mut Array1<f64>) -> &mut [f64] {
    v.as_slice_mut().expect("parameters are stored in standard layout")
}

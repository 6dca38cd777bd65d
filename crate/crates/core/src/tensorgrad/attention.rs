//! Luong attention with the bilinear ("general") score
//! `score_t = h_tᵀ W s`, where `h_t` is an encoder state and `s` the previous
//! decoder state. Weights are the softmax of the scores over valid encoder
//! steps and the context is the weighted sum of encoder states.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};

use crate::error::{shape_err, Result};

/// Values kept from the forward pass of one decoder step.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    query: Array2<f64>,
    alpha: Array2<f64>,
    s_prev: Array2<f64>,
}

impl AttentionCache {
    /// Attention weights, `B × T` (zero beyond each sequence's length).
    pub fn alpha(&self) -> &Array2<f64> {
        &self.alpha
    }
}

/// Gradients of a single attention step.
#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub d_encoder: Array2<f64>,
    pub d_state: Array1<f64>,
    pub d_w: Array2<f64>,
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// `encoder` is `B × T × H_enc`, `s_prev` is `B × H_dec`, `w` is `H_enc × H_dec`.
/// Only the first `lens[b]` encoder steps of sequence `b` are attended.
pub fn attention_forward_batch(
    encoder: &Array3<f64>,
    lens: &[usize],
    s_prev: ArrayView2<f64>,
    w: &Array2<f64>,
) -> (Array2<f64>, AttentionCache) {
    let (batch, steps, enc_dim) = encoder.dim();
    let query = s_prev.dot(&w.t());
    let mut alpha = Array2::zeros((batch, steps));
    let mut context = Array2::zeros((batch, enc_dim));
    for b in 0..batch {
        let len = lens[b];
        let states = encoder.slice(s![b, ..len, ..]);
        let mut scores = states.dot(&query.row(b));
        softmax_in_place(scores.as_slice_mut().expect("contiguous"));
        context.row_mut(b).assign(&scores.dot(&states));
        alpha.slice_mut(s![b, ..len]).assign(&scores);
    }
    (context, AttentionCache { query, alpha, s_prev: s_prev.to_owned() })
}

/// Backward of one step. Adds into `d_encoder` (same shape as `encoder`) and
/// `d_w`; returns the gradient with respect to `s_prev`.
pub fn attention_backward_batch(
    encoder: &Array3<f64>,
    lens: &[usize],
    w: &Array2<f64>,
    cache: &AttentionCache,
    d_context: &Array2<f64>,
    d_encoder: &mut Array3<f64>,
    d_w: &mut Array2<f64>,
) -> Array2<f64> {
    let (batch, _, enc_dim) = encoder.dim();
    let mut d_query = Array2::zeros((batch, enc_dim));
    for b in 0..batch {
        let len = lens[b];
        let states = encoder.slice(s![b, ..len, ..]);
        let alpha = cache.alpha.slice(s![b, ..len]);
        let dc = d_context.row(b);
        let q = cache.query.row(b);
        let d_alpha = states.dot(&dc);
        let weighted: f64 = alpha.dot(&d_alpha);
        let d_score = &alpha * &(d_alpha - weighted);
        d_query.row_mut(b).assign(&d_score.dot(&states));
        let mut d_states = d_encoder.slice_mut(s![b, ..len, ..]);
        for ((mut row, &a), &ds) in d_states.outer_iter_mut().zip(alpha.iter()).zip(d_score.iter()) {
            row.zip_mut_with(&dc, |r, &c| *r += a * c);
            row.zip_mut_with(&q, |r, &qv| *r += ds * qv);
        }
    }
    *d_w += &d_query.t().dot(&cache.s_prev);
    d_query.dot(w)
}

fn check_shapes(encoder: &Array2<f64>, s_prev: &Array1<f64>, w: &Array2<f64>) -> Result<()> {
    if encoder.nrows() == 0 {
        return Err(shape_err("attention over zero encoder steps"));
    }
    if w.dim() != (encoder.ncols(), s_prev.len()) {
        return Err(shape_err(format!(
            "attention W is {:?}, expected ({}, {})",
            w.dim(),
            encoder.ncols(),
            s_prev.len()
        )));
    }
    Ok(())
}

/// Single-sequence attention: `encoder` is `T × H_enc`. Returns `(context, alpha)`.
pub fn attention_step(
    encoder: &Array2<f64>,
    s_prev: &Array1<f64>,
    w: &Array2<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    check_shapes(encoder, s_prev, w)?;
    let enc = encoder.clone().insert_axis(Axis(0));
    let (ctx, cache) = attention_forward_batch(&enc, &[encoder.nrows()], s_prev.view().insert_axis(Axis(0)), w);
    Ok((ctx.row(0).to_owned(), cache.alpha.row(0).to_owned()))
}

/// Gradients of `⟨d_context, context⟩` for [`attention_step`].
pub fn attention_step_backward(
    encoder: &Array2<f64>,
    s_prev: &Array1<f64>,
    w: &Array2<f64>,
    d_context: &Array1<f64>,
) -> Result<AttentionGrads> {
    check_shapes(encoder, s_prev, w)?;
    if d_context.len() != encoder.ncols() {
        return Err(shape_err("upstream gradient length differs from encoder width"));
    }
    let enc = encoder.clone().insert_axis(Axis(0));
    let lens = [encoder.nrows()];
    let (_, cache) = attention_forward_batch(&enc, &lens, s_prev.view().insert_axis(Axis(0)), w);
    let mut d_enc = Array3::zeros(enc.raw_dim());
    let mut d_w = Array2::zeros(w.raw_dim());
    let d_state = attention_backward_batch(
        &enc,
        &lens,
        w,
        &cache,
        &d_context.clone().insert_axis(Axis(0)),
        &mut d_enc,
        &mut d_w,
    );
    Ok(AttentionGrads {
        d_encoder: d_enc.index_axis_move(Axis(0), 0),
        d_state: d_state.row(0).to_owned(),
        d_w,
    })
}

//! Attention-regression network and the no-attention baseline.
//!
//! The attention model runs a GRU encoder over the input frames, then for
//! every output step scores all encoder states against the previous decoder
//! state, feeds the (dropout-regularized) context vector to a GRU decoder and
//! maps each decoder state through a linear head. Input and output sequences
//! have the same length. The baseline drops attention and the decoder and
//! reads the head straight off the encoder states.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};

use crate::error::{invalid, shape_err, Result};
use crate::signal::{FeatureKind, FeatureSequence, N_TRACT_VARIABLES};
use crate::tensorgrad::{
    attention_backward_batch, attention_forward_batch, dense_backward_batch, dense_forward_batch,
    dropout_mask, glorot_uniform, gru_backward_batch, gru_forward_batch, masked_mse_batch,
    mat_slice, mat_slice_mut, seeded_rng, AttentionCache, DenseParams, GruCache, GruParams,
    ParamTensors, SeededRng,
};

pub const ENCODER_HIDDEN: usize = 256;
pub const DECODER_HIDDEN: usize = 128;
pub const DROPOUT_RATE: f64 = 0.2;
/// Head widths: tract variables, MFCC-13, MFCC-128.
pub const SUPPORTED_OUTPUT_DIMS: [usize; 3] = [N_TRACT_VARIABLES, 13, 128];

fn check_output_dim(d_out: usize) -> Result<()> {
    if SUPPORTED_OUTPUT_DIMS.contains(&d_out) {
        Ok(())
    } else {
        Err(invalid(format!("unsupported output dimension {d_out}, expected one of {SUPPORTED_OUTPUT_DIMS:?}")))
    }
}

/// Layer widths of an attention model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelDims {
    pub d_in: usize,
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub d_out: usize,
}

impl ModelDims {
    pub fn standard(d_in: usize, d_out: usize) -> Self {
        Self { d_in, encoder_hidden: ENCODER_HIDDEN, decoder_hidden: DECODER_HIDDEN, d_out }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: GruParams,
    /// `encoder_hidden × decoder_hidden`.
    pub attention_w: Array2<f64>,
    pub decoder: GruParams,
    pub head: DenseParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    pub encoder: GruParams,
    pub head: DenseParams,
}

/// Attention weights of one forward pass; row `k` is the distribution used at output step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    pub weights: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub encoder_states: Array2<f64>,
    pub decoder_states: Array2<f64>,
    pub contexts: Array2<f64>,
    pub prediction: Array2<f64>,
    pub attention: AttentionTrace,
}

/// Zero-padded mini-batch, time-major: inputs `T × B × D_in`, mask `T × B`.
#[derive(Debug, Clone)]
pub struct Batch {
    inputs: Array3<f64>,
    targets: Option<Array3<f64>>,
    lens: Vec<usize>,
    mask: Array2<f64>,
}

impl Batch {
    /// Pads every sequence to the longest one, or to `pad_to` if that is longer.
    pub fn new(inputs: &[ArrayView2<f64>], targets: Option<&[ArrayView2<f64>]>, pad_to: Option<usize>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(invalid("empty batch"));
        }
        let d_in = inputs[0].ncols();
        let lens: Vec<usize> = inputs.iter().map(|x| x.nrows()).collect();
        if lens.iter().any(|&l| l == 0) {
            return Err(invalid("batch contains an empty sequence"));
        }
        if inputs.iter().any(|x| x.ncols() != d_in) {
            return Err(shape_err("batch inputs disagree on feature dimension"));
        }
        let steps = lens.iter().copied().max().unwrap_or(0).max(pad_to.unwrap_or(0));
        let batch = inputs.len();
        let mut x = Array3::zeros((steps, batch, d_in));
        let mut mask = Array2::zeros((steps, batch));
        for (b, seq) in inputs.iter().enumerate() {
            x.slice_mut(s![..seq.nrows(), b, ..]).assign(seq);
            mask.slice_mut(s![..seq.nrows(), b]).fill(1.0);
        }
        let targets = match targets {
            None => None,
            Some(ts) => {
                if ts.len() != batch {
                    return Err(shape_err("targets and inputs differ in batch size"));
                }
                let d_out = ts[0].ncols();
                let mut y = Array3::zeros((steps, batch, d_out));
                for (b, (t, &len)) in ts.iter().zip(&lens).enumerate() {
                    if t.nrows() != len || t.ncols() != d_out {
                        return Err(shape_err(format!(
                            "target {b} is {:?}, input has {len} frames",
                            t.dim()
                        )));
                    }
                    y.slice_mut(s![..len, b, ..]).assign(t);
                }
                Some(y)
            }
        };
        Ok(Self { inputs: x, targets, lens, mask })
    }

    pub fn steps(&self) -> usize {
        self.inputs.dim().0
    }

    pub fn size(&self) -> usize {
        self.lens.len()
    }

    pub fn lens(&self) -> &[usize] {
        &self.lens
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.dim().2
    }

    /// Number of unpadded frames.
    pub fn active_frames(&self) -> usize {
        self.lens.iter().sum()
    }

    fn targets(&self) -> Result<&Array3<f64>> {
        self.targets.as_ref().ok_or_else(|| invalid("batch has no targets"))
    }

    /// Unpadded rows of a `T × B × D` tensor for sequence `b`.
    pub fn unpad(&self, full: &Array3<f64>, b: usize) -> Array2<f64> {
        full.slice(s![..self.lens[b], b, ..]).to_owned()
    }
}

/// Common surface of trainable sequence regressors.
pub trait Regressor: ParamTensors + Clone + Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// Same architecture with all parameters zero (gradient accumulator).
    fn zeros_like(&self) -> Self;

    /// Eval-mode predictions, `T × B × D_out`.
    fn predict_batch(&self, batch: &Batch) -> Result<Array3<f64>>;

    /// Masked MSE and its flat parameter gradient. Dropout is active when `rng` is given.
    fn loss_and_grad(&self, batch: &Batch, rng: Option<&mut SeededRng>) -> Result<(f64, Vec<f64>)>;

    fn eval_loss(&self, batch: &Batch) -> Result<f64> {
        let pred = self.predict_batch(batch)?;
        masked_mse_batch(&pred, batch.targets()?, &batch.mask).map(|(l, _)| l)
    }

    /// Eval-mode prediction for one `T × D_in` sequence.
    fn predict_sequence(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(shape_err(format!(
                "model expects {} input features, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        let batch = Batch::new(&[x], None, None)?;
        let pred = self.predict_batch(&batch)?;
        Ok(batch.unpad(&pred, 0))
    }
}

impl ModelParams {
    /// Glorot-uniform weights and zero biases for arbitrary widths.
    pub fn with_dims(dims: ModelDims, seed: u64) -> Result<Self> {
        if dims.d_in == 0 || dims.encoder_hidden == 0 || dims.decoder_hidden == 0 || dims.d_out == 0 {
            return Err(invalid(format!("all model widths must be positive: {dims:?}")));
        }
        let mut rng = seeded_rng(seed);
        let encoder = GruParams::glorot(dims.d_in, dims.encoder_hidden, &mut rng);
        let attention_w = glorot_uniform(dims.encoder_hidden, dims.decoder_hidden, &mut rng);
        let decoder = GruParams::glorot(dims.encoder_hidden, dims.decoder_hidden, &mut rng);
        let head = DenseParams::glorot(dims.decoder_hidden, dims.d_out, &mut rng);
        Ok(Self { encoder, attention_w, decoder, head })
    }

    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            encoder: GruParams::zeros(dims.d_in, dims.encoder_hidden),
            attention_w: Array2::zeros((dims.encoder_hidden, dims.decoder_hidden)),
            decoder: GruParams::zeros(dims.encoder_hidden, dims.decoder_hidden),
            head: DenseParams::zeros(dims.decoder_hidden, dims.d_out),
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            d_in: self.encoder.input_dim(),
            encoder_hidden: self.encoder.hidden_dim(),
            decoder_hidden: self.decoder.hidden_dim(),
            d_out: self.head.output_dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.decoder.validate()?;
        let d = self.dims();
        if self.attention_w.dim() != (d.encoder_hidden, d.decoder_hidden)
            || self.decoder.input_dim() != d.encoder_hidden
            || self.head.input_dim() != d.decoder_hidden
            || self.head.b.len() != d.d_out
        {
            return Err(shape_err(format!("attention model layers do not chain: {d:?}")));
        }
        Ok(())
    }

    fn forward_batch(&self, batch: &Batch, mut rng: Option<&mut SeededRng>) -> Result<AttentionPass> {
        if batch.input_dim() != self.encoder.input_dim() {
            return Err(shape_err(format!(
                "model expects {} input features, batch has {}",
                self.encoder.input_dim(),
                batch.input_dim()
            )));
        }
        let (steps, size) = (batch.steps(), batch.size());
        let (he, hd) = (self.encoder.hidden_dim(), self.decoder.hidden_dim());

        let mut encoder_states = Array3::zeros((size, steps, he));
        let mut enc_caches = Vec::with_capacity(steps);
        let mut h = Array2::zeros((size, he));
        for t in 0..steps {
            let (next, cache) = gru_forward_batch(&self.encoder, batch.inputs.index_axis(Axis(0), t), h.view());
            encoder_states.slice_mut(s![.., t, ..]).assign(&next);
            enc_caches.push(cache);
            h = next;
        }

        let mut att_caches = Vec::with_capacity(steps);
        let mut drop_masks = Vec::with_capacity(steps);
        let mut dec_caches = Vec::with_capacity(steps);
        let mut contexts = Vec::with_capacity(steps);
        let mut dec_states = Vec::with_capacity(steps + 1);
        let mut preds = Array3::zeros((steps, size, self.head.output_dim()));
        dec_states.push(Array2::zeros((size, hd)));
        for k in 0..steps {
            let prev = &dec_states[k];
            let (context, att) = attention_forward_batch(&encoder_states, &batch.lens, prev.view(), &self.attention_w);
            let mask = match rng.as_deref_mut() {
                Some(r) => Some(dropout_mask(size, he, DROPOUT_RATE, r)?),
                None => None,
            };
            let dec_in = match &mask {
                Some(m) => &context * m,
                None => context.clone(),
            };
            let (next, dec_cache) = gru_forward_batch(&self.decoder, dec_in.view(), prev.view());
            preds.index_axis_mut(Axis(0), k).assign(&dense_forward_batch(&self.head, next.view()));
            att_caches.push(att);
            drop_masks.push(mask);
            dec_caches.push(dec_cache);
            contexts.push(context);
            dec_states.push(next);
        }
        Ok(AttentionPass { encoder_states, enc_caches, att_caches, drop_masks, dec_caches, contexts, dec_states, preds })
    }

    fn backward_batch(&self, batch: &Batch, pass: &AttentionPass, d_pred: &Array3<f64>) -> ModelParams {
        let steps = batch.steps();
        let mut g = self.zeros_like();
        let mut d_enc_states = Array3::zeros(pass.encoder_states.raw_dim());
        let mut ds_carry = Array2::zeros(pass.dec_states[0].raw_dim());
        for k in (0..steps).rev() {
            let dy = d_pred.index_axis(Axis(0), k).to_owned();
            let mut ds = dense_backward_batch(&self.head, pass.dec_states[k + 1].view(), &dy, &mut g.head);
            ds += &ds_carry;
            let (d_in, mut ds_prev) = gru_backward_batch(&self.decoder, &pass.dec_caches[k], &ds, &mut g.decoder, true);
            let mut d_context = d_in.expect("requested");
            if let Some(m) = &pass.drop_masks[k] {
                d_context *= m;
            }
            ds_prev += &attention_backward_batch(
                &pass.encoder_states,
                &batch.lens,
                &self.attention_w,
                &pass.att_caches[k],
                &d_context,
                &mut d_enc_states,
                &mut g.attention_w,
            );
            ds_carry = ds_prev;
        }
        let mut dh_carry = Array2::zeros((batch.size(), self.encoder.hidden_dim()));
        for t in (0..steps).rev() {
            let dh = &d_enc_states.slice(s![.., t, ..]) + &dh_carry;
            let (_, dh_prev) = gru_backward_batch(&self.encoder, &pass.enc_caches[t], &dh, &mut g.encoder, false);
            dh_carry = dh_prev;
        }
        g
    }
}

struct AttentionPass {
    encoder_states: Array3<f64>,
    enc_caches: Vec<GruCache>,
    att_caches: Vec<AttentionCache>,
    drop_masks: Vec<Option<Array2<f64>>>,
    dec_caches: Vec<GruCache>,
    contexts: Vec<Array2<f64>>,
    dec_states: Vec<Array2<f64>>,
    preds: Array3<f64>,
}

fn prefixed<'a>(prefix: &str, items: Vec<(String, usize, usize, &'a [f64])>) -> Vec<(String, usize, usize, &'a [f64])> {
    items.into_iter().map(|(n, r, c, v)| (format!("{prefix}.{n}"), r, c, v)).collect()
}

impl ParamTensors for ModelParams {
    fn tensors(&self) -> Vec<(String, usize, usize, &[f64])> {
        let mut out = prefixed("encoder", self.encoder.tensors());
        out.push(("attention.w".to_string(), self.attention_w.nrows(), self.attention_w.ncols(), mat_slice(&self.attention_w)));
        out.extend(prefixed("decoder", self.decoder.tensors()));
        out.extend(prefixed("head", self.head.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.tensors_mut();
        out.push(mat_slice_mut(&mut self.attention_w));
        out.extend(self.decoder.tensors_mut());
        out.extend(self.head.tensors_mut());
        out
    }
}

impl Regressor for ModelParams {
    fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.head.output_dim()
    }

    fn zeros_like(&self) -> Self {
        ModelParams::zeros(self.dims())
    }

    fn predict_batch(&self, batch: &Batch) -> Result<Array3<f64>> {
        Ok(self.forward_batch(batch, None)?.preds)
    }

    fn loss_and_grad(&self, batch: &Batch, rng: Option<&mut SeededRng>) -> Result<(f64, Vec<f64>)> {
        let pass = self.forward_batch(batch, rng)?;
        let (loss, d_pred) = masked_mse_batch(&pass.preds, batch.targets()?, &batch.mask)?;
        Ok((loss, self.backward_batch(batch, &pass, &d_pred).to_flat()))
    }
}

impl BaselineParams {
    pub fn with_dims(d_in: usize, hidden: usize, d_out: usize, seed: u64) -> Result<Self> {
        if d_in == 0 || hidden == 0 || d_out == 0 {
            return Err(invalid("baseline widths must be positive"));
        }
        let mut rng = seeded_rng(seed);
        let encoder = GruParams::glorot(d_in, hidden, &mut rng);
        let head = DenseParams::glorot(hidden, d_out, &mut rng);
        Ok(Self { encoder, head })
    }

    pub fn zeros(d_in: usize, hidden: usize, d_out: usize) -> Self {
        Self { encoder: GruParams::zeros(d_in, hidden), head: DenseParams::zeros(hidden, d_out) }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.head.input_dim() != self.encoder.hidden_dim() || self.head.b.len() != self.head.output_dim() {
            return Err(shape_err("baseline head does not match encoder width"));
        }
        Ok(())
    }

    fn forward_batch(&self, batch: &Batch) -> Result<(Vec<GruCache>, Vec<Array2<f64>>, Array3<f64>)> {
        if batch.input_dim() != self.encoder.input_dim() {
            return Err(shape_err(format!(
                "baseline expects {} input features, batch has {}",
                self.encoder.input_dim(),
                batch.input_dim()
            )));
        }
        let steps = batch.steps();
        let mut h = Array2::zeros((batch.size(), self.encoder.hidden_dim()));
        let mut caches = Vec::with_capacity(steps);
        let mut states = Vec::with_capacity(steps);
        let mut preds = Array3::zeros((steps, batch.size(), self.head.output_dim()));
        for t in 0..steps {
            let (next, cache) = gru_forward_batch(&self.encoder, batch.inputs.index_axis(Axis(0), t), h.view());
            preds.index_axis_mut(Axis(0), t).assign(&dense_forward_batch(&self.head, next.view()));
            caches.push(cache);
            states.push(next.clone());
            h = next;
        }
        Ok((caches, states, preds))
    }
}

impl ParamTensors for BaselineParams {
    fn tensors(&self) -> Vec<(String, usize, usize, &[f64])> {
        let mut out = prefixed("encoder", self.encoder.tensors());
        out.extend(prefixed("head", self.head.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.tensors_mut();
        out.extend(self.head.tensors_mut());
        out
    }
}

impl Regressor for BaselineParams {
    fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.head.output_dim()
    }

    fn zeros_like(&self) -> Self {
        BaselineParams::zeros(self.encoder.input_dim(), self.encoder.hidden_dim(), self.head.output_dim())
    }

    fn predict_batch(&self, batch: &Batch) -> Result<Array3<f64>> {
        Ok(self.forward_batch(batch)?.2)
    }

    fn loss_and_grad(&self, batch: &Batch, _rng: Option<&mut SeededRng>) -> Result<(f64, Vec<f64>)> {
        let (caches, states, preds) = self.forward_batch(batch)?;
        let (loss, d_pred) = masked_mse_batch(&preds, batch.targets()?, &batch.mask)?;
        let mut g = self.zeros_like();
        let mut dh_carry = Array2::zeros((batch.size(), self.encoder.hidden_dim()));
        for t in (0..batch.steps()).rev() {
            let dy = d_pred.index_axis(Axis(0), t).to_owned();
            let dh = dense_backward_batch(&self.head, states[t].view(), &dy, &mut g.head) + &dh_carry;
            let (_, dh_prev) = gru_backward_batch(&self.encoder, &caches[t], &dh, &mut g.encoder, false);
            dh_carry = dh_prev;
        }
        Ok((loss, g.to_flat()))
    }
}

/// Attention model with the published widths: GRU encoder of 256 units,
/// 256×128 attention matrix, GRU decoder of 128 units, linear head to `d_out`.
pub fn init_attention_model(d_in: usize, d_out: usize, seed: u64) -> Result<ModelParams> {
    check_output_dim(d_out)?;
    ModelParams::with_dims(ModelDims::standard(d_in, d_out), seed)
}

/// Baseline with a 256-unit GRU encoder read out frame by frame.
pub fn init_baseline_model(d_in: usize, d_out: usize, seed: u64) -> Result<BaselineParams> {
    check_output_dim(d_out)?;
    BaselineParams::with_dims(d_in, ENCODER_HIDDEN, d_out, seed)
}

/// Full forward pass over one sequence, with intermediate states.
pub fn forward(m: &ModelParams, x: &FeatureSequence, train_mode: bool, rng: &mut SeededRng) -> Result<ForwardTrace> {
    forward_matrix(m, x.data().view(), train_mode, rng)
}

/// [`forward`] on a bare `T × D_in` matrix.
pub fn forward_matrix(m: &ModelParams, x: ArrayView2<f64>, train_mode: bool, rng: &mut SeededRng) -> Result<ForwardTrace> {
    m.validate()?;
    let batch = Batch::new(&[x], None, None)?;
    let pass = m.forward_batch(&batch, if train_mode { Some(rng) } else { None })?;
    let steps = batch.steps();
    let stack = |rows: &[Array2<f64>]| {
        let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
        ndarray::concatenate(Axis(0), &views).expect("equal widths")
    };
    let mut weights = Array2::zeros((steps, steps));
    for (k, cache) in pass.att_caches.iter().enumerate() {
        weights.row_mut(k).assign(&cache.alpha().row(0));
    }
    Ok(ForwardTrace {
        encoder_states: pass.encoder_states.index_axis(Axis(0), 0).to_owned(),
        decoder_states: stack(&pass.dec_states[1..]),
        contexts: stack(&pass.contexts),
        prediction: batch.unpad(&pass.preds, 0),
        attention: AttentionTrace { weights },
    })
}

/// Eval-mode baseline prediction, `T × D_out`.
pub fn forward_baseline(b: &BaselineParams, x: &FeatureSequence) -> Result<Array2<f64>> {
    b.validate()?;
    b.predict_sequence(x.data().view())
}

/// Eval-mode prediction wrapped as a feature sequence of `kind` at the input's rate.
pub fn predict_features<R: Regressor>(m: &R, x: &FeatureSequence, kind: FeatureKind) -> Result<FeatureSequence> {
    let pred = m.predict_sequence(x.data().view())?;
    FeatureSequence::new(pred, x.rate_hz(), kind)
}

/// EEG features straight to MFCC.
pub fn predict_direct(m: &ModelParams, eeg: &FeatureSequence) -> Result<FeatureSequence> {
    if !matches!(m.output_dim(), 13 | 128) {
        return Err(shape_err(format!("direct model head has {} units, expected 13 or 128", m.output_dim())));
    }
    predict_features(m, eeg, FeatureKind::Mfcc)
}

/// EEG features to tract variables.
pub fn predict_articulatory(m: &ModelParams, eeg: &FeatureSequence) -> Result<FeatureSequence> {
    if m.output_dim() != N_TRACT_VARIABLES {
        return Err(shape_err(format!(
            "articulatory model head has {} units, expected {N_TRACT_VARIABLES}",
            m.output_dim()
        )));
    }
    predict_features(m, eeg, FeatureKind::Articulatory)
}

/// EEG to tract variables with `m1`, then tract variables to MFCC with `m2`.
pub fn predict_two_step(m1: &ModelParams, m2: &ModelParams, eeg: &FeatureSequence) -> Result<FeatureSequence> {
    if m2.input_dim() != N_TRACT_VARIABLES {
        return Err(shape_err(format!(
            "second-stage model takes {} inputs, expected {N_TRACT_VARIABLES}",
            m2.input_dim()
        )));
    }
    let tvs = predict_articulatory(m1, eeg)?;
    predict_direct(m2, &tvs)
}

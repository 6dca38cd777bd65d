use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NvxError, Result};
use crate::model::{Batch, Regressor};
use crate::tensorgrad::{adam_update, seeded_rng, AdamConfig, AdamState};

/// One `(input, target)` sequence pair, both `T × D`.
pub type Pair = (Array2<f64>, Array2<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

/// Per-epoch losses. Training loss is the frame-weighted mean over the
/// epoch's batches with dropout active; validation loss is eval-mode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub val_loss: Vec<f64>,
}

fn make_batch(pairs: &[Pair], idx: &[usize]) -> Result<Batch> {
    let xs: Vec<_> = idx.iter().map(|&i| pairs[i].0.view()).collect();
    let ys: Vec<_> = idx.iter().map(|&i| pairs[i].1.view()).collect();
    Batch::new(&xs, Some(&ys), None)
}

/// Frame-weighted eval-mode loss over `pairs` in chunks of `batch_size`.
pub fn eval_loss<R: Regressor>(model: &R, pairs: &[Pair], batch_size: usize) -> Result<f64> {
    let idx: Vec<usize> = (0..pairs.len()).collect();
    let (mut total, mut frames) = (0.0, 0usize);
    for chunk in idx.chunks(batch_size.max(1)) {
        let batch = make_batch(pairs, chunk)?;
        total += model.eval_loss(&batch)? * batch.active_frames() as f64;
        frames += batch.active_frames();
    }
    if frames == 0 {
        return Err(invalid("no frames to evaluate"));
    }
    Ok(total / frames as f64)
}

/// Mini-batch Adam on masked MSE. Batch order is reshuffled every epoch from `opts.seed`.
pub fn fit_regressor<R: Regressor>(model: &mut R, train: &[Pair], val: &[Pair], opts: &FitOptions) -> Result<History> {
    if train.is_empty() {
        return Err(invalid("empty training split"));
    }
    if opts.epochs == 0 || opts.batch_size == 0 {
        return Err(invalid("epochs and batch_size must be at least 1"));
    }
    let mut rng = seeded_rng(opts.seed);
    let mut params = model.to_flat();
    let mut adam = AdamState::new(params.len(), opts.adam);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();
    for _ in 0..opts.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut frames) = (0.0, 0usize);
        for chunk in order.chunks(opts.batch_size) {
            let batch = make_batch(train, chunk)?;
            let (loss, grad) = model.loss_and_grad(&batch, Some(&mut rng))?;
            if !loss.is_finite() {
                return Err(NvxError::NonFinite("training loss"));
            }
            adam_update(&mut params, &grad, &mut adam)?;
            model.assign_flat(&params);
            total += loss * batch.active_frames() as f64;
            frames += batch.active_frames();
        }
        history.train_loss.push(total / frames as f64);
        if !val.is_empty() {
            history.val_loss.push(eval_loss(model, val, opts.batch_size)?);
        }
    }
    Ok(history)
}

use std::f64::consts::LN_10;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::FeatureSequence;
use crate::error::{shape_err, Result};

/// `10 / ln 10`, the dB conversion factor in mel cepstral distortion.
pub const MCD_SCALE: f64 = 10.0 / LN_10;

/// Per-dimension mean and standard deviation used for z-scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Population statistics over the rows of `data`. Zero-variance
    /// dimensions get a standard deviation of 1.
    pub fn from_rows(data: &Array2<f64>) -> Self {
        let mean = data.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(data.ncols()));
        let std = data.var_axis(Axis(0), 0.0).mapv(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
        Self { mean: mean.to_vec(), std: std.to_vec() }
    }

    /// Statistics over all frames of several sequences.
    pub fn from_sequences<'a>(seqs: impl IntoIterator<Item = &'a FeatureSequence>) -> Result<Self> {
        let views: Vec<_> = seqs.into_iter().map(|s| s.data().view()).collect();
        if views.is_empty() {
            return Err(shape_err("cannot compute statistics of zero sequences"));
        }
        let stacked = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| shape_err(format!("sequences disagree on dimension: {e}")))?;
        Ok(Self::from_rows(&stacked))
    }

    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `(x − mean) / std` per dimension.
pub fn znormalize(x: &FeatureSequence, stats: &NormStats) -> Result<FeatureSequence> {
    if stats.mean.len() != x.dim() || stats.std.len() != x.dim() {
        return Err(shape_err(format!(
            "statistics cover {} dimensions, sequence has {}",
            stats.mean.len(),
            x.dim()
        )));
    }
    if stats.std.iter().any(|s| !(*s > 0.0)) {
        return Err(shape_err("standard deviations must be positive"));
    }
    let mut out = x.data().clone();
    for mut row in out.rows_mut() {
        for ((v, m), s) in row.iter_mut().zip(&stats.mean).zip(&stats.std) {
            *v = (*v - m) / s;
        }
    }
    FeatureSequence::new(out, x.rate_hz(), x.kind())
}

/// Per-frame distortion over coefficients `1..D`.
pub fn mcd_frames(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<Vec<f64>> {
    if pred.dim() != truth.dim() {
        return Err(shape_err(format!(
            "mcd operands differ in shape: {:?} vs {:?}",
            pred.dim(),
            truth.dim()
        )));
    }
    Ok(pred
        .rows()
        .into_iter()
        .zip(truth.rows())
        .map(|(p, t)| {
            let sq: f64 = p.iter().zip(t.iter()).skip(1).map(|(a, b)| (a - b) * (a - b)).sum();
            MCD_SCALE * (2.0 * sq).sqrt()
        })
        .collect())
}

/// Mean mel cepstral distortion over frames, coefficient 0 excluded.
pub fn mcd(pred: &FeatureSequence, truth: &FeatureSequence) -> Result<f64> {
    let frames = mcd_frames(pred.data(), truth.data())?;
    Ok(frames.iter().sum::<f64>() / frames.len() as f64)
}

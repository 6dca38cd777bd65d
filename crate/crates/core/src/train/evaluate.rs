use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::pipeline::{TrainConfig, TrainedPipeline};
use super::split::SplitIndex;
use crate::data::Corpus;
use crate::error::{invalid, Result};
use crate::signal::{mcd, znormalize, FeatureSequence, NormStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScore {
    pub id: String,
    pub mcd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: TrainConfig,
    pub per_utterance: Vec<UtteranceScore>,
    pub average_mcd: f64,
    pub baseline_mean_predictor_mcd: f64,
}

/// Per-utterance MCD of predictions against truth after z-scoring both
/// with `norm`, plus the average MCD of predicting the mean of `norm`.
/// Returns `(scores, average, mean-predictor average)`.
pub fn score_predictions(
    norm: &NormStats,
    items: &[(String, FeatureSequence, &FeatureSequence)],
) -> Result<(Vec<UtteranceScore>, f64, f64)> {
    if items.is_empty() {
        return Err(invalid("no test utterances to score"));
    }
    let mut scores = Vec::with_capacity(items.len());
    let mut floor = 0.0;
    for (id, pred, truth) in items {
        let t = znormalize(truth, norm)?;
        scores.push(UtteranceScore { id: id.clone(), mcd: mcd(&znormalize(pred, norm)?, &t)? });
        let mean = FeatureSequence::new(Array2::zeros(t.data().raw_dim()), t.rate_hz(), t.kind())?;
        floor += mcd(&mean, &t)?;
    }
    let n = items.len() as f64;
    let average = scores.iter().map(|s| s.mcd).sum::<f64>() / n;
    Ok((scores, average, floor / n))
}

/// Test-split MCD of a trained pipeline. Predictions and truth are z-scored
/// with the training-split MFCC statistics.
pub fn evaluate(p: &TrainedPipeline, c: &Corpus, split: &SplitIndex) -> Result<MetricsReport> {
    if split.test_ids.is_empty() {
        return Err(invalid("empty test split"));
    }
    let mut items = Vec::with_capacity(split.test_ids.len());
    for id in &split.test_ids {
        let u = c.get(id).ok_or_else(|| invalid(format!("test id {id} not in corpus")))?;
        items.push((id.clone(), p.predict_mfcc(&u.eeg)?, &u.mfcc));
    }
    let (per_utterance, average_mcd, baseline_mean_predictor_mcd) = score_predictions(&p.frontend.mfcc_norm, &items)?;
    Ok(MetricsReport { config: p.config.clone(), per_utterance, average_mcd, baseline_mean_predictor_mcd })
}

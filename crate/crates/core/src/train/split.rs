use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Corpus;
use crate::error::{invalid, Result};
use crate::tensorgrad::seeded_rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndex {
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

/// Sizes of the 80/10/10 partition of `n` items.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (0.8 * n as f64).round() as usize;
    let rest = n - train;
    let val = rest.div_ceil(2);
    (train, val, rest - val)
}

/// Seeded shuffle of the corpus ids followed by an 80/10/10 cut.
pub fn split_corpus(c: &Corpus, seed: u64) -> Result<SplitIndex> {
    split_ids(c.ids(), seed)
}

pub fn split_ids(mut ids: Vec<String>, seed: u64) -> Result<SplitIndex> {
    if ids.len() < 10 {
        return Err(invalid(format!("need at least 10 utterances to split, got {}", ids.len())));
    }
    let (train, val, _) = split_sizes(ids.len());
    ids.shuffle(&mut seeded_rng(seed));
    let test_ids = ids.split_off(train + val);
    let val_ids = ids.split_off(train);
    Ok(SplitIndex { train_ids: ids, val_ids, test_ids, seed })
}

//! Splitting, training, evaluation and checkpointing.

mod checkpoint;
mod evaluate;
mod fit;
mod pipeline;
mod split;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use evaluate::{evaluate, score_predictions, MetricsReport, UtteranceScore};
pub use fit::{eval_loss, fit_regressor, FitOptions, History, Pair};
pub use pipeline::{
    train_first_stage, train_model, train_second_stage, Approach, Architecture, FirstStage, Frontend, Network,
    TrainConfig, TrainOutcome, TrainedPipeline,
};
pub use split::{split_corpus, split_ids, split_sizes, SplitIndex};

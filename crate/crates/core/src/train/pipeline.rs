use std::collections::HashMap;

use ndarray::{Array2, Array3, ArrayView1, Axis};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::fit::{fit_regressor, FitOptions, History, Pair};
use super::split::SplitIndex;
use crate::data::{Corpus, Utterance};
use crate::error::{invalid, shape_err, Result};
use crate::model::{init_attention_model, init_baseline_model, Batch, BaselineParams, ModelParams, Regressor};
use crate::reduce::{feature_set_components, kpca_fit, kpca_transform, Kernel, KpcaModel};
use crate::signal::{FeatureKind, FeatureSequence, NormStats, N_TRACT_VARIABLES};
use crate::tensorgrad::{seeded_rng, AdamConfig, ParamTensors, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Direct,
    TwoStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Attention,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub approach: Approach,
    pub architecture: Architecture,
    pub feature_set: u8,
    pub mfcc_dim: usize,
    pub rate: u32,
    /// Kernel PCA of the EEG frames to the feature set's width.
    pub reduce: bool,
    /// Cap on training frames used to fit the kernel PCA.
    pub kpca_max_frames: usize,
    /// Train the second stage on ground-truth tract variables instead of stage-1 predictions.
    pub stage2_ground_truth: bool,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2500,
            batch_size: 100,
            seed: 0,
            approach: Approach::Direct,
            architecture: Architecture::Attention,
            feature_set: 1,
            mfcc_dim: 13,
            rate: 100,
            reduce: true,
            kpca_max_frames: 1000,
            stage2_ground_truth: false,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid("epochs and batch_size must be at least 1"));
        }
        let components = feature_set_components(self.feature_set)?;
        if !matches!(self.mfcc_dim, 13 | 128) {
            return Err(invalid(format!("mfcc_dim {} is not 13 or 128", self.mfcc_dim)));
        }
        if !matches!(self.rate, 100 | 32) {
            return Err(invalid(format!("rate {} is not 100 or 32", self.rate)));
        }
        if self.reduce && self.kpca_max_frames < components {
            return Err(invalid(format!("kpca_max_frames {} is below {components} components", self.kpca_max_frames)));
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        Ok(())
    }

    fn stage_seed(&self, stage: usize, role: u64) -> u64 {
        self.seed ^ (((stage as u64 + 1) << 32) | role)
    }

    fn fit_options(&self, stage: usize) -> FitOptions {
        FitOptions { epochs: self.epochs, batch_size: self.batch_size, seed: self.stage_seed(stage, 2), adam: self.adam }
    }
}

/// A trained network of either architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Attention(ModelParams),
    Baseline(BaselineParams),
}

impl Network {
    pub fn init(arch: Architecture, d_in: usize, d_out: usize, seed: u64) -> Result<Self> {
        Ok(match arch {
            Architecture::Attention => Network::Attention(init_attention_model(d_in, d_out, seed)?),
            Architecture::Baseline => Network::Baseline(init_baseline_model(d_in, d_out, seed)?),
        })
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            Network::Attention(_) => Architecture::Attention,
            Network::Baseline(_) => Architecture::Baseline,
        }
    }
}

impl ParamTensors for Network {
    fn tensors(&self) -> Vec<(String, usize, usize, &[f64])> {
        match self {
            Network::Attention(m) => m.tensors(),
            Network::Baseline(b) => b.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Network::Attention(m) => m.tensors_mut(),
            Network::Baseline(b) => b.tensors_mut(),
        }
    }
}

impl Regressor for Network {
    fn input_dim(&self) -> usize {
        match self {
            Network::Attention(m) => m.input_dim(),
            Network::Baseline(b) => b.input_dim(),
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            Network::Attention(m) => m.output_dim(),
            Network::Baseline(b) => b.output_dim(),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            Network::Attention(m) => Network::Attention(m.zeros_like()),
            Network::Baseline(b) => Network::Baseline(b.zeros_like()),
        }
    }

    fn predict_batch(&self, batch: &Batch) -> Result<Array3<f64>> {
        match self {
            Network::Attention(m) => m.predict_batch(batch),
            Network::Baseline(b) => b.predict_batch(batch),
        }
    }

    fn loss_and_grad(&self, batch: &Batch, rng: Option<&mut SeededRng>) -> Result<(f64, Vec<f64>)> {
        match self {
            Network::Attention(m) => m.loss_and_grad(batch, rng),
            Network::Baseline(b) => b.loss_and_grad(batch, rng),
        }
    }
}

/// Everything fitted on the training split before the networks: the
/// optional kernel PCA and the z-score statistics of each stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontend {
    pub kpca: Option<KpcaModel>,
    pub eeg_norm: NormStats,
    pub tv_norm: NormStats,
    pub mfcc_norm: NormStats,
}

fn normalize(x: &Array2<f64>, stats: &NormStats) -> Array2<f64> {
    (x - &ArrayView1::from(&stats.mean)) / &ArrayView1::from(&stats.std)
}

fn denormalize(x: &Array2<f64>, stats: &NormStats) -> Array2<f64> {
    x * &ArrayView1::from(&stats.std) + &ArrayView1::from(&stats.mean)
}

fn stack(rows: &[&Array2<f64>]) -> Array2<f64> {
    let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
    ndarray::concatenate(Axis(0), &views).expect("equal widths")
}

impl Frontend {
    pub fn fit(train: &[&Utterance], cfg: &TrainConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(invalid("empty training split"));
        }
        let eeg = stack(&train.iter().map(|u| u.eeg.data()).collect::<Vec<_>>());
        let kpca = if cfg.reduce {
            let components = feature_set_components(cfg.feature_set)?;
            let fit_frames = if eeg.nrows() > cfg.kpca_max_frames {
                let mut rows = sample(&mut seeded_rng(cfg.stage_seed(0, 1)), eeg.nrows(), cfg.kpca_max_frames).into_vec();
                rows.sort_unstable();
                eeg.select(Axis(0), &rows)
            } else {
                eeg.clone()
            };
            let kernel = Kernel::default_rbf(&fit_frames);
            Some(kpca_fit(&fit_frames, kernel, components)?)
        } else {
            None
        };
        let reduced = match &kpca {
            Some(k) => kpca_transform(k, &eeg)?,
            None => eeg,
        };
        let tv = stack(&train.iter().map(|u| u.articulatory.data()).collect::<Vec<_>>());
        let mfcc = stack(&train.iter().map(|u| u.mfcc.data()).collect::<Vec<_>>());
        Ok(Self {
            kpca,
            eeg_norm: NormStats::from_rows(&reduced),
            tv_norm: NormStats::from_rows(&tv),
            mfcc_norm: NormStats::from_rows(&mfcc),
        })
    }

    /// Reduced, standardized network input.
    pub fn inputs(&self, eeg: &FeatureSequence) -> Result<Array2<f64>> {
        let reduced = match &self.kpca {
            Some(k) => kpca_transform(k, eeg.data())?,
            None => eeg.data().clone(),
        };
        if reduced.ncols() != self.eeg_norm.dim() {
            return Err(shape_err(format!("expected {} EEG features, got {}", self.eeg_norm.dim(), reduced.ncols())));
        }
        Ok(normalize(&reduced, &self.eeg_norm))
    }

    pub fn tv_targets(&self, u: &Utterance) -> Array2<f64> {
        normalize(u.articulatory.data(), &self.tv_norm)
    }

    pub fn mfcc_targets(&self, u: &Utterance) -> Result<Array2<f64>> {
        if u.mfcc.dim() != self.mfcc_norm.dim() {
            return Err(shape_err(format!("expected {} MFCC coefficients, got {}", self.mfcc_norm.dim(), u.mfcc.dim())));
        }
        Ok(normalize(u.mfcc.data(), &self.mfcc_norm))
    }

    pub fn mfcc_from_normalized(&self, x: &Array2<f64>) -> Array2<f64> {
        denormalize(x, &self.mfcc_norm)
    }

    pub fn tv_from_normalized(&self, x: &Array2<f64>) -> Array2<f64> {
        denormalize(x, &self.tv_norm)
    }
}

/// A frontend plus one (direct) or two (two-step) networks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub config: TrainConfig,
    pub frontend: Frontend,
    pub stages: Vec<Network>,
}

impl TrainedPipeline {
    /// Network output in standardized MFCC units.
    pub fn predict_normalized(&self, eeg: &FeatureSequence) -> Result<Array2<f64>> {
        let mut x = self.frontend.inputs(eeg)?;
        for net in &self.stages {
            x = net.predict_sequence(x.view())?;
        }
        Ok(x)
    }

    pub fn predict_mfcc(&self, eeg: &FeatureSequence) -> Result<FeatureSequence> {
        let z = self.predict_normalized(eeg)?;
        FeatureSequence::new(self.frontend.mfcc_from_normalized(&z), eeg.rate_hz(), FeatureKind::Mfcc)
    }

    /// First-stage tract variables of a two-step pipeline.
    pub fn predict_articulatory(&self, eeg: &FeatureSequence) -> Result<FeatureSequence> {
        if self.config.approach != Approach::TwoStep {
            return Err(invalid("direct pipelines have no articulatory stage"));
        }
        let z = self.stages[0].predict_sequence(self.frontend.inputs(eeg)?.view())?;
        FeatureSequence::new(self.frontend.tv_from_normalized(&z), eeg.rate_hz(), FeatureKind::Articulatory)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let expected = match self.config.approach {
            Approach::Direct => 1,
            Approach::TwoStep => 2,
        };
        if self.stages.len() != expected {
            return Err(shape_err(format!("{:?} pipeline with {} networks", self.config.approach, self.stages.len())));
        }
        let mut width = self.frontend.eeg_norm.dim();
        for net in &self.stages {
            if net.input_dim() != width {
                return Err(shape_err("pipeline stages do not chain"));
            }
            width = net.output_dim();
        }
        if width != self.frontend.mfcc_norm.dim() || width != self.config.mfcc_dim {
            return Err(shape_err("pipeline output width differs from the MFCC width"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub pipeline: TrainedPipeline,
    /// One history per stage.
    pub histories: Vec<History>,
}

/// Training state after the first network.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstStage {
    pub config: TrainConfig,
    pub frontend: Frontend,
    pub network: Network,
    pub history: History,
}

fn lookup<'a>(c: &'a Corpus, ids: &[String]) -> Result<Vec<&'a Utterance>> {
    let by_id: HashMap<&str, &Utterance> = c.utterances().iter().map(|u| (u.id.as_str(), u)).collect();
    ids.iter()
        .map(|id| by_id.get(id.as_str()).copied().ok_or_else(|| invalid(format!("split names unknown utterance {id}"))))
        .collect()
}

fn check_corpus(c: &Corpus, cfg: &TrainConfig) -> Result<()> {
    if let Some(d) = c.mfcc_dim() {
        if d != cfg.mfcc_dim {
            return Err(shape_err(format!("corpus has {d} MFCC coefficients, config says {}", cfg.mfcc_dim)));
        }
    }
    if let Some(r) = c.rate_hz() {
        if r != cfg.rate as f64 {
            return Err(shape_err(format!("corpus frame rate is {r} Hz, config says {}", cfg.rate)));
        }
    }
    Ok(())
}

/// Fits the frontend and the first network: EEG→MFCC for direct, EEG→TV for two-step.
pub fn train_first_stage(c: &Corpus, split: &SplitIndex, cfg: &TrainConfig) -> Result<FirstStage> {
    cfg.validate()?;
    check_corpus(c, cfg)?;
    let train = lookup(c, &split.train_ids)?;
    let val = lookup(c, &split.val_ids)?;
    let frontend = Frontend::fit(&train, cfg)?;
    let target = |u: &Utterance| -> Result<Array2<f64>> {
        match cfg.approach {
            Approach::Direct => frontend.mfcc_targets(u),
            Approach::TwoStep => Ok(frontend.tv_targets(u)),
        }
    };
    let pairs = |us: &[&Utterance]| -> Result<Vec<Pair>> {
        us.iter().map(|u| Ok((frontend.inputs(&u.eeg)?, target(u)?))).collect()
    };
    let (train_pairs, val_pairs) = (pairs(&train)?, pairs(&val)?);
    let d_out = match cfg.approach {
        Approach::Direct => cfg.mfcc_dim,
        Approach::TwoStep => N_TRACT_VARIABLES,
    };
    let mut network = Network::init(cfg.architecture, frontend.eeg_norm.dim(), d_out, cfg.stage_seed(0, 0))?;
    let history = fit_regressor(&mut network, &train_pairs, &val_pairs, &cfg.fit_options(0))?;
    Ok(FirstStage { config: cfg.clone(), frontend, network, history })
}

/// Fits the tract-variable→MFCC network on first-stage predictions
/// (or ground-truth tract variables when configured).
pub fn train_second_stage(first: &FirstStage, c: &Corpus, split: &SplitIndex) -> Result<(Network, History)> {
    let cfg = &first.config;
    if cfg.approach != Approach::TwoStep {
        return Err(invalid("second stage only exists for two-step training"));
    }
    let fe = &first.frontend;
    let pairs = |ids: &[String]| -> Result<Vec<Pair>> {
        lookup(c, ids)?
            .into_iter()
            .map(|u| {
                let tv = if cfg.stage2_ground_truth {
                    fe.tv_targets(u)
                } else {
                    first.network.predict_sequence(fe.inputs(&u.eeg)?.view())?
                };
                Ok((tv, fe.mfcc_targets(u)?))
            })
            .collect()
    };
    let (train_pairs, val_pairs) = (pairs(&split.train_ids)?, pairs(&split.val_ids)?);
    let mut network = Network::init(cfg.architecture, N_TRACT_VARIABLES, cfg.mfcc_dim, cfg.stage_seed(1, 0))?;
    let history = fit_regressor(&mut network, &train_pairs, &val_pairs, &cfg.fit_options(1))?;
    Ok((network, history))
}

pub fn train_model(c: &Corpus, split: &SplitIndex, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let first = train_first_stage(c, split, cfg)?;
    let (stages, histories) = match cfg.approach {
        Approach::Direct => (vec![first.network.clone()], vec![first.history.clone()]),
        Approach::TwoStep => {
            let (second, h2) = train_second_stage(&first, c, split)?;
            (vec![first.network.clone(), second], vec![first.history.clone(), h2])
        }
    };
    let pipeline = TrainedPipeline { config: cfg.clone(), frontend: first.frontend, stages };
    pipeline.validate()?;
    Ok(TrainOutcome { pipeline, histories })
}

//! Deterministic synthetic EEG / tract-variable / MFCC triples.
//!
//! Each utterance draws a smooth six-dimensional latent trajectory `z(t)`.
//! The tract variables are `z` itself, the acoustic features are a fixed
//! two-layer tanh map of `z`, and the EEG features are a fixed linear map of
//! `z`; both observed streams get additive gaussian noise. The maps depend
//! only on the seed and the widths, so every utterance shares them.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, Utterance};
use crate::error::{invalid, Result};
use crate::signal::{
    griffin_lim, invert_mfcc, FeatureKind, FeatureSequence, MfccConfig, N_TRACT_VARIABLES,
};

pub const SUPPORTED_EEG_DIMS: [usize; 3] = [30, 50, 93];
pub const SUPPORTED_MFCC_DIMS: [usize; 2] = [13, 128];
pub const SUPPORTED_RATES: [u32; 2] = [100, 32];
pub const ACOUSTIC_HIDDEN: usize = 32;
pub const LATENT_COMPONENTS: usize = 3;
pub const LATENT_AMPLITUDE: (f64, f64) = (0.2, 0.6);
pub const LATENT_FREQ_HZ: (f64, f64) = (2.0, 8.0);
const WAVEFORM_ITERATIONS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_utterances: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub eeg_dim: usize,
    pub mfcc_dim: usize,
    pub rate: u32,
    pub noise_std: f64,
    pub seed: u64,
    #[serde(default)]
    pub waveforms: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_utterances: 200,
            t_min: 20,
            t_max: 40,
            eeg_dim: 30,
            mfcc_dim: 13,
            rate: 100,
            noise_std: 0.05,
            seed: 0,
            waveforms: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_utterances == 0 {
            return Err(invalid("n_utterances must be at least 1"));
        }
        if self.t_min == 0 || self.t_min > self.t_max {
            return Err(invalid(format!("bad frame range {}..={}", self.t_min, self.t_max)));
        }
        if !SUPPORTED_EEG_DIMS.contains(&self.eeg_dim) {
            return Err(invalid(format!("eeg_dim {} not in {SUPPORTED_EEG_DIMS:?}", self.eeg_dim)));
        }
        if !SUPPORTED_MFCC_DIMS.contains(&self.mfcc_dim) {
            return Err(invalid(format!("mfcc_dim {} not in {SUPPORTED_MFCC_DIMS:?}", self.mfcc_dim)));
        }
        if !SUPPORTED_RATES.contains(&self.rate) {
            return Err(invalid(format!("rate {} not in {SUPPORTED_RATES:?}", self.rate)));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(invalid("noise_std must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Largest possible frame-to-frame change of any latent coordinate at `rate` frames/s.
pub fn max_latent_delta(rate: u32) -> f64 {
    LATENT_COMPONENTS as f64 * LATENT_AMPLITUDE.1 * 2.0 * PI * LATENT_FREQ_HZ.1 / rate as f64
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let normal = Normal::new(0.0, std).expect("positive std");
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng))
}

/// The fixed observation maps shared by every utterance of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthMaps {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub a: Array2<f64>,
}

impl SynthMaps {
    pub fn new(cfg: &SynthConfig) -> Self {
        let mut rng = rng_for(cfg.seed, 0);
        let w1 = gaussian(ACOUSTIC_HIDDEN, N_TRACT_VARIABLES, 0.8, &mut rng);
        let b1 = gaussian(1, ACOUSTIC_HIDDEN, 0.5, &mut rng).remove_axis(Axis(0));
        let w2 = gaussian(cfg.mfcc_dim, ACOUSTIC_HIDDEN, 1.5 / (ACOUSTIC_HIDDEN as f64).sqrt(), &mut rng);
        let b2 = gaussian(1, cfg.mfcc_dim, 1.0, &mut rng).remove_axis(Axis(0));
        let a = gaussian(cfg.eeg_dim, N_TRACT_VARIABLES, 1.0 / (N_TRACT_VARIABLES as f64).sqrt(), &mut rng);
        Self { w1, b1, w2, b2, a }
    }

    /// Hidden layer `tanh(W1 z + b1)` for a `T × 6` latent.
    pub fn hidden(&self, z: &Array2<f64>) -> Array2<f64> {
        (z.dot(&self.w1.t()) + &self.b1).mapv(f64::tanh)
    }

    /// Noise-free acoustic features.
    pub fn acoustic(&self, z: &Array2<f64>) -> Array2<f64> {
        self.hidden(z).dot(&self.w2.t()) + &self.b2
    }

    /// Noise-free EEG features.
    pub fn eeg(&self, z: &Array2<f64>) -> Array2<f64> {
        z.dot(&self.a.t())
    }
}

/// Sum of three random sinusoids per latent dimension, `frames × 6`.
pub fn latent_trajectory(frames: usize, rate: u32, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut z = Array2::zeros((frames, N_TRACT_VARIABLES));
    for d in 0..N_TRACT_VARIABLES {
        for _ in 0..LATENT_COMPONENTS {
            let amp = rng.random_range(LATENT_AMPLITUDE.0..LATENT_AMPLITUDE.1);
            let freq = rng.random_range(LATENT_FREQ_HZ.0..LATENT_FREQ_HZ.1);
            let phase = rng.random_range(0.0..2.0 * PI);
            let step = 2.0 * PI * freq / rate as f64;
            for t in 0..frames {
                z[[t, d]] += amp * (step * t as f64 + phase).sin();
            }
        }
    }
    z
}

pub fn gen_synthetic_corpus(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.validate()?;
    let maps = SynthMaps::new(cfg);
    let rate = cfg.rate as f64;
    let mfcc_cfg = if cfg.waveforms { Some(MfccConfig::preset(cfg.mfcc_dim, cfg.rate)?) } else { None };
    let mut utterances = Vec::with_capacity(cfg.n_utterances);
    for i in 0..cfg.n_utterances {
        let mut rng = rng_for(cfg.seed, i as u64 + 1);
        let frames = rng.random_range(cfg.t_min..=cfg.t_max);
        let z = latent_trajectory(frames, cfg.rate, &mut rng);
        let mut acoustic = maps.acoustic(&z);
        let mut eeg = maps.eeg(&z);
        if cfg.noise_std > 0.0 {
            acoustic += &gaussian(frames, cfg.mfcc_dim, cfg.noise_std, &mut rng);
            eeg += &gaussian(frames, cfg.eeg_dim, cfg.noise_std, &mut rng);
        }
        let mfcc = FeatureSequence::new(acoustic, rate, FeatureKind::Mfcc)?;
        let waveform = match &mfcc_cfg {
            Some(mc) => Some(griffin_lim(&invert_mfcc(&mfcc, mc)?, WAVEFORM_ITERATIONS, cfg.seed)?.peak_normalized()),
            None => None,
        };
        utterances.push(Utterance::new(
            format!("utt{i:04}"),
            FeatureSequence::new(eeg, rate, FeatureKind::Eeg)?,
            FeatureSequence::new(z, rate, FeatureKind::Articulatory)?,
            mfcc,
            waveform,
        )?);
    }
    Corpus::new(utterances)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig { n_utterances: 6, t_min: 10, t_max: 30, seed, ..SynthConfig::default() }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(gen_synthetic_corpus(&small(4)).unwrap(), gen_synthetic_corpus(&small(4)).unwrap());
        assert_ne!(gen_synthetic_corpus(&small(4)).unwrap(), gen_synthetic_corpus(&small(5)).unwrap());
    }

    #[test]
    fn shape_contract() {
        let c = gen_synthetic_corpus(&small(1)).unwrap();
        assert_eq!(c.len(), 6);
        for u in c.utterances() {
            let t = u.frames();
            assert!((10..=30).contains(&t));
            assert_eq!(u.eeg.data().dim(), (t, 30));
            assert_eq!(u.articulatory.data().dim(), (t, 6));
            assert_eq!(u.mfcc.data().dim(), (t, 13));
            assert_eq!(u.mfcc.rate_hz(), 100.0);
            assert!(u.waveform.is_none());
        }
    }

    #[test]
    fn latent_is_smooth() {
        for rate in SUPPORTED_RATES {
            let cfg = SynthConfig { rate, ..small(2) };
            let bound = max_latent_delta(rate);
            for u in gen_synthetic_corpus(&cfg).unwrap().utterances() {
                let z = u.articulatory.data();
                for t in 1..z.nrows() {
                    for d in 0..6 {
                        assert!((z[[t, d]] - z[[t - 1, d]]).abs() <= bound);
                    }
                }
            }
        }
    }

    #[test]
    fn prefix_utterances_do_not_depend_on_corpus_size() {
        let a = gen_synthetic_corpus(&small(3)).unwrap();
        let b = gen_synthetic_corpus(&SynthConfig { n_utterances: 3, ..small(3) }).unwrap();
        assert_eq!(&a.utterances()[..3], b.utterances());
    }

    #[test]
    fn waveforms_are_optional() {
        let cfg = SynthConfig { n_utterances: 1, t_min: 8, t_max: 8, waveforms: true, ..small(1) };
        let c = gen_synthetic_corpus(&cfg).unwrap();
        let w = c.utterances()[0].waveform.as_ref().unwrap();
        assert_eq!(w.rate_hz(), 16000);
        assert!(!w.is_empty());
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SynthConfig { n_utterances: 0, ..small(0) },
            SynthConfig { t_min: 0, ..small(0) },
            SynthConfig { t_min: 40, t_max: 30, ..small(0) },
            SynthConfig { eeg_dim: 31, ..small(0) },
            SynthConfig { mfcc_dim: 20, ..small(0) },
            SynthConfig { rate: 50, ..small(0) },
            SynthConfig { noise_std: -0.1, ..small(0) },
        ] {
            assert!(gen_synthetic_corpus(&cfg).is_err(), "{cfg:?}");
        }
    }
}

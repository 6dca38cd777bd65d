//! Signal processing for the EEG and speech sides of the pipeline.
//!
//! Contains IIR filter design and application for EEG preprocessing, MFCC
//! analysis and inversion, Griffin-Lim phase reconstruction, mel cepstral
//! distortion scoring and 16-bit PCM WAV I/O.

mod filter;
mod griffin_lim;
mod mcd;
mod mfcc;
mod wav;

pub use filter::{design_bandpass, design_notch, iir_filter, IirFilter};
pub use griffin_lim::{griffin_lim, griffin_lim_traced, stft_magnitude, Spectrogram};
pub use mcd::{mcd, mcd_frames, znormalize, NormStats, MCD_SCALE};
pub use mfcc::{
    dct_ii_orthonormal, extract_mfcc, idct_ii_orthonormal, invert_mfcc, log_mel_from_spectrogram,
    log_mel_spectrogram, mel_filterbank, mfcc_to_log_mel, MfccConfig,
};
pub use wav::{read_wav, write_wav};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NvxError, Result};

/// Audio sample rate used throughout.
pub const AUDIO_RATE_HZ: u32 = 16_000;

/// What a feature sequence describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Eeg,
    Mfcc,
    Articulatory,
}

impl FeatureKind {
    pub fn tag(self) -> u8 {
        match self {
            FeatureKind::Eeg => 0,
            FeatureKind::Mfcc => 1,
            FeatureKind::Articulatory => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(FeatureKind::Eeg),
            1 => Some(FeatureKind::Mfcc),
            2 => Some(FeatureKind::Articulatory),
            _ => None,
        }
    }
}

/// Number of articulatory tract variables.
pub const N_TRACT_VARIABLES: usize = 6;

/// A T×D matrix of per-frame features with its frame rate and kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    data: Array2<f64>,
    rate_hz: f64,
    kind: FeatureKind,
}

impl FeatureSequence {
    pub fn new(data: Array2<f64>, rate_hz: f64, kind: FeatureKind) -> Result<Self> {
        let (t, d) = data.dim();
        if t == 0 || d == 0 {
            return Err(invalid(format!("feature sequence must be non-empty, got {t}x{d}")));
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(invalid(format!("frame rate must be positive, got {rate_hz}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NvxError::NonFinite("feature sequence"));
        }
        match kind {
            FeatureKind::Mfcc if d != 13 && d != 128 => {
                return Err(invalid(format!("mfcc sequences have 13 or 128 coefficients, got {d}")))
            }
            FeatureKind::Articulatory if d != N_TRACT_VARIABLES => {
                return Err(invalid(format!(
                    "articulatory sequences have {N_TRACT_VARIABLES} tract variables, got {d}"
                )))
            }
            _ => {}
        }
        Ok(Self { data, rate_hz, kind })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
}

/// Mono audio at 16 kHz.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
}

impl Waveform {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(NvxError::NonFinite("waveform"));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn rate_hz(&self) -> u32 {
        AUDIO_RATE_HZ
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Copy scaled so the peak absolute amplitude is 1 (silence is returned unchanged).
    pub fn peak_normalized(&self) -> Waveform {
        let peak = self.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return self.clone();
        }
        Waveform { samples: self.samples.iter().map(|v| v / peak).collect() }
    }
}

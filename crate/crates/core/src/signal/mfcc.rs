use std::f64::consts::PI;

use nalgebra::DMatrix;
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::griffin_lim::{stft_magnitude, Spectrogram};
use super::{FeatureKind, FeatureSequence, Waveform, AUDIO_RATE_HZ};
use crate::error::{invalid, shape_err, Result};

/// Framing and filterbank parameters for MFCC analysis at 16 kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub n_coeffs: usize,
    pub frame_rate_hz: u32,
    pub window_samples: usize,
    pub hop_samples: usize,
    pub fft_size: usize,
    pub n_mel_bands: usize,
    pub log_floor: f64,
}

impl MfccConfig {
    pub const LOG_FLOOR: f64 = 1e-10;

    /// Standard framing for a coefficient count and frame rate.
    ///
    /// 100 Hz uses 25 ms windows with a 512-point FFT; 32 Hz uses 1024-sample
    /// windows. Thirteen coefficients come from 40 mel bands, 128 from 128.
    pub fn preset(n_coeffs: usize, frame_rate_hz: u32) -> Result<Self> {
        let (window_samples, fft_size) = match frame_rate_hz {
            100 => (400, 512),
            32 => (1024, 1024),
            other => return Err(invalid(format!("unsupported frame rate {other} Hz (100 or 32)"))),
        };
        let n_mel_bands = match n_coeffs {
            13 => 40,
            128 => 128,
            other => return Err(invalid(format!("unsupported coefficient count {other} (13 or 128)"))),
        };
        Self::new(n_coeffs, frame_rate_hz, window_samples, fft_size, n_mel_bands, Self::LOG_FLOOR)
    }

    /// 13 coefficients at 100 frames per second.
    pub fn mfcc13() -> Self {
        Self::preset(13, 100).expect("valid preset")
    }

    /// 128 coefficients at 32 frames per second.
    pub fn mfcc128() -> Self {
        Self::preset(128, 32).expect("valid preset")
    }

    pub fn new(
        n_coeffs: usize,
        frame_rate_hz: u32,
        window_samples: usize,
        fft_size: usize,
        n_mel_bands: usize,
        log_floor: f64,
    ) -> Result<Self> {
        if frame_rate_hz == 0 || AUDIO_RATE_HZ % frame_rate_hz != 0 {
            return Err(invalid(format!(
                "frame rate {frame_rate_hz} Hz does not divide {AUDIO_RATE_HZ} Hz"
            )));
        }
        if n_coeffs == 0 || n_coeffs > n_mel_bands {
            return Err(invalid(format!(
                "need 1 <= n_coeffs <= n_mel_bands, got {n_coeffs} and {n_mel_bands}"
            )));
        }
        if window_samples == 0 || fft_size < window_samples {
            return Err(invalid(format!("fft size {fft_size} below window {window_samples}")));
        }
        if !(log_floor > 0.0 && log_floor.is_finite()) {
            return Err(invalid("log floor must be positive"));
        }
        Ok(Self {
            n_coeffs,
            frame_rate_hz,
            window_samples,
            hop_samples: (AUDIO_RATE_HZ / frame_rate_hz) as usize,
            fft_size,
            n_mel_bands,
            log_floor,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames produced from `len` samples (no edge padding).
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.window_samples {
            0
        } else {
            1 + (len - self.window_samples) / self.hop_samples
        }
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-style filterbank spanning 0 Hz to Nyquist, `n_mel_bands × n_bins`.
pub fn mel_filterbank(cfg: &MfccConfig) -> Array2<f64> {
    let n_bins = cfg.n_bins();
    let nyquist = AUDIO_RATE_HZ as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..cfg.n_mel_bands + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (cfg.n_mel_bands + 1) as f64))
        .collect();
    let bin_hz = AUDIO_RATE_HZ as f64 / cfg.fft_size as f64;
    let mut fb = Array2::zeros((cfg.n_mel_bands, n_bins));
    for m in 0..cfg.n_mel_bands {
        let (lo, centre, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f > lo && f <= centre {
                (f - lo) / (centre - lo)
            } else if f > centre && f < hi {
                (hi - f) / (hi - centre)
            } else {
                0.0
            };
            fb[[m, k]] = w;
        }
    }
    fb
}

/// Orthonormal DCT-II basis, row k = coefficient k.
fn dct_basis(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(k, i)| {
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        scale * (PI * (i as f64 + 0.5) * k as f64 / n as f64).cos()
    })
}

/// Row-wise orthonormal DCT-II.
pub fn dct_ii_orthonormal(x: &Array2<f64>) -> Array2<f64> {
    x.dot(&dct_basis(x.ncols()).t())
}

/// Row-wise inverse of [`dct_ii_orthonormal`].
pub fn idct_ii_orthonormal(x: &Array2<f64>) -> Array2<f64> {
    x.dot(&dct_basis(x.ncols()))
}

fn log_mel_from_magnitudes(mags: &Array2<f64>, cfg: &MfccConfig) -> Array2<f64> {
    let fb = mel_filterbank(cfg);
    let floor = cfg.log_floor;
    mags.dot(&fb.t()).mapv(|e| e.max(floor).ln())
}

/// Floored log mel energies of each analysis frame, `T × n_mel_bands`.
pub fn log_mel_spectrogram(w: &Waveform, cfg: &MfccConfig) -> Result<Array2<f64>> {
    if w.len() < cfg.window_samples {
        return Err(invalid(format!(
            "audio of {} samples is shorter than one {}-sample window",
            w.len(),
            cfg.window_samples
        )));
    }
    let spec = stft_magnitude(w.samples(), cfg.window_samples, cfg.hop_samples, cfg.fft_size)?;
    Ok(log_mel_from_magnitudes(spec.frames(), cfg))
}

/// Floored log mel energies of an existing magnitude spectrogram.
pub fn log_mel_from_spectrogram(s: &Spectrogram, cfg: &MfccConfig) -> Result<Array2<f64>> {
    if s.fft_size() != cfg.fft_size {
        return Err(shape_err(format!(
            "spectrogram fft size {} does not match config {}",
            s.fft_size(),
            cfg.fft_size
        )));
    }
    Ok(log_mel_from_magnitudes(s.frames(), cfg))
}

/// Hann window, magnitude spectrum, mel energies, floored log, orthonormal
/// DCT-II, first `n_coeffs` coefficients.
pub fn extract_mfcc(w: &Waveform, cfg: &MfccConfig) -> Result<FeatureSequence> {
    let log_mel = log_mel_spectrogram(w, cfg)?;
    let cepstra = dct_ii_orthonormal(&log_mel);
    let kept = cepstra.slice(s![.., ..cfg.n_coeffs]).to_owned();
    FeatureSequence::new(kept, cfg.frame_rate_hz as f64, FeatureKind::Mfcc)
}

/// Log mel energies implied by cepstra (zero-padded to the band count).
pub fn mfcc_to_log_mel(m: &FeatureSequence, cfg: &MfccConfig) -> Result<Array2<f64>> {
    if m.kind() != FeatureKind::Mfcc {
        return Err(invalid(format!("expected mfcc features, got {:?}", m.kind())));
    }
    if m.dim() != cfg.n_coeffs {
        return Err(shape_err(format!(
            "mfcc has {} coefficients, config expects {}",
            m.dim(),
            cfg.n_coeffs
        )));
    }
    let mut padded = Array2::zeros((m.frames(), cfg.n_mel_bands));
    padded.slice_mut(s![.., ..cfg.n_coeffs]).assign(m.data());
    Ok(idct_ii_orthonormal(&padded))
}

/// Cepstra back to a linear magnitude spectrogram through the pseudo-inverse
/// of the mel filterbank, clipped at zero.
pub fn invert_mfcc(m: &FeatureSequence, cfg: &MfccConfig) -> Result<Spectrogram> {
    let mel_energy = mfcc_to_log_mel(m, cfg)?.mapv(f64::exp);
    let fb = mel_filterbank(cfg);
    let fb_na = DMatrix::from_fn(fb.nrows(), fb.ncols(), |i, j| fb[[i, j]]);
    let pinv = fb_na
        .pseudo_inverse(1e-12)
        .map_err(|e| invalid(format!("mel filterbank pseudo-inverse failed: {e}")))?;
    let pinv = Array2::from_shape_fn((pinv.nrows(), pinv.ncols()), |(i, j)| pinv[(i, j)]);
    let mags = mel_energy.dot(&pinv.t()).mapv(|v| if v.is_finite() { v.max(0.0) } else { 0.0 });
    Spectrogram::new(mags, cfg.fft_size, cfg.hop_samples, cfg.window_samples)
}

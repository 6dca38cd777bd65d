use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Waveform;
use crate::error::{invalid, shape_err, NvxError, Result};

/// Linear-magnitude short-time spectrum, one row per frame, `fft_size / 2 + 1` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    frames: Array2<f64>,
    fft_size: usize,
    hop_samples: usize,
    window_samples: usize,
}

impl Spectrogram {
    pub fn new(
        frames: Array2<f64>,
        fft_size: usize,
        hop_samples: usize,
        window_samples: usize,
    ) -> Result<Self> {
        if fft_size == 0 || hop_samples == 0 || window_samples == 0 || window_samples > fft_size {
            return Err(invalid(format!(
                "invalid framing: fft={fft_size} hop={hop_samples} window={window_samples}"
            )));
        }
        if frames.ncols() != fft_size / 2 + 1 {
            return Err(shape_err(format!(
                "spectrogram has {} bins, fft size {fft_size} needs {}",
                frames.ncols(),
                fft_size / 2 + 1
            )));
        }
        if frames.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("spectrogram magnitudes must be finite and non-negative"));
        }
        Ok(Self { frames, fft_size, hop_samples, window_samples })
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn hop_samples(&self) -> usize {
        self.hop_samples
    }

    pub fn window_samples(&self) -> usize {
        self.window_samples
    }

    /// Number of samples spanned by the frames.
    pub fn signal_len(&self) -> usize {
        match self.n_frames() {
            0 => 0,
            t => (t - 1) * self.hop_samples + self.window_samples,
        }
    }
}

pub(crate) fn hann(len: usize) -> Vec<f64> {
    (0..len).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos()).collect()
}

struct Stft {
    window: Vec<f64>,
    hop: usize,
    fft_size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Stft {
    fn new(window_samples: usize, hop: usize, fft_size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            window: hann(window_samples),
            hop,
            fft_size,
            forward: planner.plan_fft_forward(fft_size),
            inverse: planner.plan_fft_inverse(fft_size),
        }
    }

    fn n_frames(&self, len: usize) -> usize {
        if len < self.window.len() {
            0
        } else {
            1 + (len - self.window.len()) / self.hop
        }
    }

    /// Half spectrum (`fft_size / 2 + 1` bins) for every frame.
    fn analyze(&self, x: &[f64]) -> Vec<Vec<Complex64>> {
        let bins = self.fft_size / 2 + 1;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_size];
        (0..self.n_frames(x.len()))
            .map(|t| {
                let start = t * self.hop;
                buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                for (n, w) in self.window.iter().enumerate() {
                    buf[n] = Complex64::new(w * x[start + n], 0.0);
                }
                self.forward.process(&mut buf);
                buf[..bins].to_vec()
            })
            .collect()
    }

    /// Least-squares signal whose windowed frames best match `spectra`.
    fn synthesize(&self, spectra: &[Vec<Complex64>]) -> Vec<f64> {
        let win = self.window.len();
        let len = match spectra.len() {
            0 => 0,
            t => (t - 1) * self.hop + win,
        };
        let mut num = vec![0.0; len];
        let mut den = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_size];
        let bins = self.fft_size / 2 + 1;
        let scale = 1.0 / self.fft_size as f64;
        for (t, half) in spectra.iter().enumerate() {
            buf[..bins].copy_from_slice(half);
            for k in bins..self.fft_size {
                buf[k] = half[self.fft_size - k].conj();
            }
            // DC and Nyquist must be real for a real frame.
            buf[0].im = 0.0;
            if self.fft_size % 2 == 0 {
                buf[self.fft_size / 2].im = 0.0;
            }
            self.inverse.process(&mut buf);
            let start = t * self.hop;
            for (n, w) in self.window.iter().enumerate() {
                num[start + n] += w * buf[n].re * scale;
                den[start + n] += w * w;
            }
        }
        num.iter()
            .zip(&den)
            .map(|(n, d)| if *d > 1e-12 { n / d } else { 0.0 })
            .collect()
    }

    /// Distance between `|spectra|` and `target` over the full two-sided spectrum.
    fn consistency_error(&self, spectra: &[Vec<Complex64>], target: &Array2<f64>) -> f64 {
        let last = self.fft_size / 2;
        let mut acc = 0.0;
        for (t, frame) in spectra.iter().enumerate() {
            for (k, c) in frame.iter().enumerate() {
                let d = c.norm() - target[[t, k]];
                let weight = if k == 0 || (k == last && self.fft_size % 2 == 0) { 1.0 } else { 2.0 };
                acc += weight * d * d;
            }
        }
        acc.sqrt()
    }
}

/// Magnitude STFT with a periodic Hann window and no edge padding.
pub fn stft_magnitude(
    samples: &[f64],
    window_samples: usize,
    hop_samples: usize,
    fft_size: usize,
) -> Result<Spectrogram> {
    if window_samples == 0 || hop_samples == 0 || window_samples > fft_size {
        return Err(invalid(format!(
            "invalid framing: fft={fft_size} hop={hop_samples} window={window_samples}"
        )));
    }
    if samples.len() < window_samples {
        return Err(invalid(format!(
            "signal of {} samples is shorter than one {window_samples}-sample window",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(NvxError::NonFinite("stft input"));
    }
    let stft = Stft::new(window_samples, hop_samples, fft_size);
    let spectra = stft.analyze(samples);
    let bins = fft_size / 2 + 1;
    let mut frames = Array2::zeros((spectra.len(), bins));
    for (t, frame) in spectra.iter().enumerate() {
        for (k, c) in frame.iter().enumerate() {
            frames[[t, k]] = c.norm();
        }
    }
    Spectrogram::new(frames, fft_size, hop_samples, window_samples)
}

/// Griffin-Lim reconstruction from zero initial phase.
///
/// The seed is accepted for interface stability; zero-phase initialization
/// makes the result a pure function of the spectrogram and iteration count.
pub fn griffin_lim(s: &Spectrogram, iterations: usize, seed: u64) -> Result<Waveform> {
    griffin_lim_traced(s, iterations, seed).map(|(w, _)| w)
}

/// Like [`griffin_lim`], also returning the consistency error
/// `‖ |STFT(x_k)| − s ‖` of every iterate `x_0 .. x_iterations`.
pub fn griffin_lim_traced(
    s: &Spectrogram,
    iterations: usize,
    _seed: u64,
) -> Result<(Waveform, Vec<f64>)> {
    if iterations == 0 {
        return Err(invalid("griffin-lim needs at least one iteration"));
    }
    if s.n_frames() == 0 {
        return Err(invalid("cannot reconstruct an empty spectrogram"));
    }
    let stft = Stft::new(s.window_samples, s.hop_samples, s.fft_size);
    let target = &s.frames;
    let mut estimate: Vec<Vec<Complex64>> = target
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|&m| Complex64::new(m, 0.0)).collect())
        .collect();

    let mut x = stft.synthesize(&estimate);
    let mut errors = Vec::with_capacity(iterations + 1);
    for it in 0..=iterations {
        let rebuilt = stft.analyze(&x);
        errors.push(stft.consistency_error(&rebuilt, target));
        if it == iterations {
            break;
        }
        for (t, (est, frame)) in estimate.iter_mut().zip(&rebuilt).enumerate() {
            for (k, (e, c)) in est.iter_mut().zip(frame).enumerate() {
                let norm = c.norm();
                let phase = if norm > 0.0 { c / norm } else { Complex64::new(1.0, 0.0) };
                *e = phase * target[[t, k]];
            }
        }
        x = stft.synthesize(&estimate);
    }
    Ok((Waveform::new(x)?, errors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, len: usize) -> Vec<f64> {
        (0..len).map(|n| (2.0 * PI * freq * n as f64 / 16000.0).sin()).collect()
    }

    #[test]
    fn zero_spectrogram_gives_silence() {
        let s = Spectrogram::new(Array2::zeros((5, 257)), 512, 160, 400).unwrap();
        let w = griffin_lim(&s, 10, 0).unwrap();
        assert_eq!(w.len(), 4 * 160 + 400);
        assert!(w.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn output_length_matches_framing() {
        let s = stft_magnitude(&tone(300.0, 4000), 400, 160, 512).unwrap();
        assert_eq!(s.n_frames(), 1 + (4000 - 400) / 160);
        let w = griffin_lim(&s, 3, 0).unwrap();
        assert_eq!(w.len(), (s.n_frames() - 1) * 160 + 400);
    }

    #[test]
    fn perfect_phase_reconstructs_signal() {
        let x = tone(523.0, 3000);
        let stft = Stft::new(400, 160, 512);
        let spectra = stft.analyze(&x);
        let y = stft.synthesize(&spectra);
        // Samples at 0 lie under a zero window tap only.
        for n in 1..y.len() {
            assert!((x[n] - y[n]).abs() < 1e-9, "sample {n}");
        }
    }

    #[test]
    fn tone_peak_is_preserved() {
        let s = stft_magnitude(&tone(440.0, 8000), 400, 160, 512).unwrap();
        let w = griffin_lim(&s, 60, 0).unwrap();
        let out = stft_magnitude(w.samples(), 400, 160, 512).unwrap();
        let mean = out.frames().mean_axis(ndarray::Axis(0)).unwrap();
        let peak = mean.iter().enumerate().fold((0, 0.0), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc }).0;
        let expected = (440.0f64 / (16000.0 / 512.0)).round() as i64;
        assert!((peak as i64 - expected).abs() <= 1, "peak bin {peak}, expected {expected}");
    }

    #[test]
    fn consistency_error_is_non_increasing() {
        let x: Vec<f64> = tone(220.0, 6000)
            .iter()
            .zip(tone(660.0, 6000))
            .zip(tone(1100.0, 6000))
            .map(|((a, b), c)| a + 0.5 * b + 0.25 * c)
            .collect();
        let s = stft_magnitude(&x, 400, 160, 512).unwrap();
        let (_, errors) = griffin_lim_traced(&s, 60, 0).unwrap();
        assert_eq!(errors.len(), 61);
        for pair in errors.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "{} -> {}", pair[0], pair[1]);
        }
        assert!(errors[60] < errors[0]);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let s = Spectrogram::new(Array2::zeros((0, 257)), 512, 160, 400).unwrap();
        assert!(griffin_lim(&s, 5, 0).is_err());
        let s = Spectrogram::new(Array2::zeros((2, 257)), 512, 160, 400).unwrap();
        assert!(griffin_lim(&s, 0, 0).is_err());
        assert!(Spectrogram::new(Array2::zeros((2, 100)), 512, 160, 400).is_err());
        assert!(stft_magnitude(&[0.0; 100], 400, 160, 512).is_err());
    }
}

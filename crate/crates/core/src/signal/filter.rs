use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, NvxError, Result};

/// Rational transfer function `B(z) / A(z)` with `a[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IirFilter {
    b: Vec<f64>,
    a: Vec<f64>,
}

impl IirFilter {
    /// Normalizes so that `a[0] == 1`.
    pub fn new(b: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if b.is_empty() || a.is_empty() {
            return Err(invalid("filter coefficients must be non-empty"));
        }
        if b.iter().chain(&a).any(|v| !v.is_finite()) {
            return Err(NvxError::NonFinite("filter coefficients"));
        }
        let a0 = a[0];
        if a0 == 0.0 {
            return Err(invalid("leading feedback coefficient must be non-zero"));
        }
        Ok(Self {
            b: b.iter().map(|v| v / a0).collect(),
            a: a.iter().map(|v| v / a0).collect(),
        })
    }

    pub fn identity() -> Self {
        Self { b: vec![1.0], a: vec![1.0] }
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn order(&self) -> usize {
        self.a.len().max(self.b.len()) - 1
    }

    /// Complex response at `freq_hz` for sampling rate `fs_hz`.
    pub fn response(&self, freq_hz: f64, fs_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / fs_hz;
        let eval = |c: &[f64]| {
            c.iter()
                .enumerate()
                .map(|(k, &v)| v * Complex64::from_polar(1.0, -w * k as f64))
                .sum::<Complex64>()
        };
        eval(&self.b) / eval(&self.a)
    }

    pub fn magnitude(&self, freq_hz: f64, fs_hz: f64) -> f64 {
        self.response(freq_hz, fs_hz).norm()
    }

    /// Roots of the feedback polynomial, from the eigenvalues of its companion matrix.
    pub fn poles(&self) -> Vec<Complex64> {
        let n = self.a.len() - 1;
        if n == 0 {
            return Vec::new();
        }
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            companion[(0, j)] = -self.a[j + 1];
        }
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        companion.complex_eigenvalues().iter().copied().collect()
    }

    pub fn max_pole_magnitude(&self) -> f64 {
        self.poles().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.max_pole_magnitude() < 1.0
    }
}

fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        coeffs = next;
    }
    // Roots come in conjugate pairs, so imaginary parts are rounding noise.
    coeffs.into_iter().map(|c| c.re).collect()
}

/// Butterworth band-pass of total order `order` (prototype order `order / 2`),
/// designed with the bilinear transform and unit gain at the geometric band centre.
pub fn design_bandpass(low_hz: f64, high_hz: f64, order: usize, fs_hz: f64) -> Result<IirFilter> {
    if !(fs_hz > 0.0 && 0.0 < low_hz && low_hz < high_hz && high_hz < fs_hz / 2.0) {
        return Err(invalid(format!(
            "band edges must satisfy 0 < low < high < fs/2, got low={low_hz} high={high_hz} fs={fs_hz}"
        )));
    }
    if order == 0 || order % 2 != 0 {
        return Err(invalid(format!("band-pass order must be even and positive, got {order}")));
    }
    let proto_order = order / 2;
    let fs2 = 2.0 * fs_hz;
    let w_lo = fs2 * (PI * low_hz / fs_hz).tan();
    let w_hi = fs2 * (PI * high_hz / fs_hz).tan();
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    let mut poles = Vec::with_capacity(order);
    for k in 0..proto_order {
        let theta = PI * (2 * k + proto_order + 1) as f64 / (2 * proto_order) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let half = p * (bw / 2.0);
        let disc = (half * half - w0_sq).sqrt();
        for s in [half + disc, half - disc] {
            poles.push((fs2 + s) / (fs2 - s));
        }
    }
    let mut zeros = vec![Complex64::new(1.0, 0.0); proto_order];
    zeros.extend(std::iter::repeat(Complex64::new(-1.0, 0.0)).take(proto_order));

    let b = poly_from_roots(&zeros);
    let a = poly_from_roots(&poles);
    let mut filter = IirFilter::new(b, a)?;
    let centre_hz = fs_hz / PI * (w0_sq.sqrt() / fs2).atan();
    let gain = filter.magnitude(centre_hz, fs_hz);
    if !(gain.is_finite() && gain > 0.0) {
        return Err(NvxError::UnstableFilter(f64::NAN));
    }
    for v in filter.b.iter_mut() {
        *v /= gain;
    }
    let max_pole = filter.max_pole_magnitude();
    if max_pole >= 1.0 {
        return Err(NvxError::UnstableFilter(max_pole));
    }
    Ok(filter)
}

/// Second-order notch (biquad) centred on `center_hz` with quality factor `q`.
pub fn design_notch(center_hz: f64, q: f64, fs_hz: f64) -> Result<IirFilter> {
    if !(fs_hz > 0.0 && 0.0 < center_hz && center_hz < fs_hz / 2.0) {
        return Err(invalid(format!(
            "notch centre must satisfy 0 < f < fs/2, got {center_hz} at fs={fs_hz}"
        )));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(invalid(format!("notch Q must be positive, got {q}")));
    }
    let w0 = 2.0 * PI * center_hz / fs_hz;
    let alpha = w0.sin() / (2.0 * q);
    let cos_w0 = w0.cos();
    let filter = IirFilter::new(
        vec![1.0, -2.0 * cos_w0, 1.0],
        vec![1.0 + alpha, -2.0 * cos_w0, 1.0 - alpha],
    )?;
    let max_pole = filter.max_pole_magnitude();
    if max_pole >= 1.0 {
        return Err(NvxError::UnstableFilter(max_pole));
    }
    Ok(filter)
}

/// Causal filtering from zero initial state (transposed direct form II).
pub fn iir_filter(filter: &IirFilter, x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NvxError::NonFinite("filter input"));
    }
    let n = filter.a.len().max(filter.b.len());
    let mut b = filter.b.clone();
    let mut a = filter.a.clone();
    b.resize(n, 0.0);
    a.resize(n, 0.0);
    let mut state = vec![0.0; n];
    let mut y = Vec::with_capacity(x.len());
    for &xn in x {
        let yn = b[0] * xn + state[0];
        for k in 1..n {
            state[k - 1] = b[k] * xn - a[k] * yn + state[k];
        }
        y.push(yn);
    }
    Ok(y)
}

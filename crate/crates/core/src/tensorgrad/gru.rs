use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::{glorot_uniform, mat_slice, mat_slice_mut, row_vector, sigmoid, vec_slice, vec_slice_mut, ParamTensors, SeededRng};
use crate::error::{shape_err, Result};

/// Gated recurrent unit with the reset gate applied before the recurrent
/// candidate matmul:
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Array2<f64>,
    pub w_r: Array2<f64>,
    pub w_h: Array2<f64>,
    pub u_z: Array2<f64>,
    pub u_r: Array2<f64>,
    pub u_h: Array2<f64>,
    pub b_z: Array1<f64>,
    pub b_r: Array1<f64>,
    pub b_h: Array1<f64>,
}

impl GruParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Array2::zeros((hidden_dim, input_dim));
        let u = || Array2::zeros((hidden_dim, hidden_dim));
        let b = || Array1::zeros(hidden_dim);
        Self { w_z: w(), w_r: w(), w_h: w(), u_z: u(), u_r: u(), u_h: u(), b_z: b(), b_r: b(), b_h: b() }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(input_dim: usize, hidden_dim: usize, rng: &mut SeededRng) -> Self {
        let w_z = glorot_uniform(hidden_dim, input_dim, rng);
        let w_r = glorot_uniform(hidden_dim, input_dim, rng);
        let w_h = glorot_uniform(hidden_dim, input_dim, rng);
        let u_z = glorot_uniform(hidden_dim, hidden_dim, rng);
        let u_r = glorot_uniform(hidden_dim, hidden_dim, rng);
        let u_h = glorot_uniform(hidden_dim, hidden_dim, rng);
        let b = || Array1::zeros(hidden_dim);
        Self { w_z, w_r, w_h, u_z, u_r, u_h, b_z: b(), b_r: b(), b_h: b() }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, i) = (self.hidden_dim(), self.input_dim());
        let ok = [&self.w_z, &self.w_r, &self.w_h].iter().all(|m| m.dim() == (h, i))
            && [&self.u_z, &self.u_r, &self.u_h].iter().all(|m| m.dim() == (h, h))
            && [&self.b_z, &self.b_r, &self.b_h].iter().all(|b| b.len() == h);
        if ok {
            Ok(())
        } else {
            Err(shape_err(format!("gru parameter shapes inconsistent with input {i}, hidden {h}")))
        }
    }
}

impl ParamTensors for GruParams {
    fn tensors(&self) -> Vec<(String, usize, usize, &[f64])> {
        fn m<'a>(name: &str, a: &'a Array2<f64>) -> (String, usize, usize, &'a [f64]) {
            (name.to_string(), a.nrows(), a.ncols(), mat_slice(a))
        }
        let mut out = vec![
            m("w_z", &self.w_z),
            m("w_r", &self.w_r),
            m("w_h", &self.w_h),
            m("u_z", &self.u_z),
            m("u_r", &self.u_r),
            m("u_h", &self.u_h),
        ];
        for (name, b) in [("b_z", &self.b_z), ("b_r", &self.b_r), ("b_h", &self.b_h)] {
            out.push((name.to_string(), 1, b.len(), vec_slice(b)));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            mat_slice_mut(&mut self.w_z),
            mat_slice_mut(&mut self.w_r),
            mat_slice_mut(&mut self.w_h),
            mat_slice_mut(&mut self.u_z),
            mat_slice_mut(&mut self.u_r),
            mat_slice_mut(&mut self.u_h),
            vec_slice_mut(&mut self.b_z),
            vec_slice_mut(&mut self.b_r),
            vec_slice_mut(&mut self.b_h),
        ]
    }
}

/// Activations saved by [`gru_forward_batch`] for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    z: Array2<f64>,
    r: Array2<f64>,
    cand: Array2<f64>,
}

/// One step for a batch: `x` is `B × input`, `h_prev` is `B × hidden`.
pub fn gru_forward_batch(
    p: &GruParams,
    x: ArrayView2<f64>,
    h_prev: ArrayView2<f64>,
) -> (Array2<f64>, GruCache) {
    let mut z = x.dot(&p.w_z.t()) + h_prev.dot(&p.u_z.t()) + &p.b_z;
    z.mapv_inplace(sigmoid);
    let mut r = x.dot(&p.w_r.t()) + h_prev.dot(&p.u_r.t()) + &p.b_r;
    r.mapv_inplace(sigmoid);
    let gated = &r * &h_prev;
    let mut cand = x.dot(&p.w_h.t()) + gated.dot(&p.u_h.t()) + &p.b_h;
    cand.mapv_inplace(f64::tanh);
    let mut h = Array2::zeros(h_prev.raw_dim());
    Zip::from(&mut h).and(&z).and(&h_prev).and(&cand).for_each(|h, &z, &hp, &c| {
        *h = (1.0 - z) * hp + z * c;
    });
    let cache = GruCache { x: x.to_owned(), h_prev: h_prev.to_owned(), z, r, cand };
    (h, cache)
}

/// Backward of one batched step. Accumulates parameter gradients into
/// `grads` and returns `(dx, dh_prev)`; `dx` is skipped when `want_dx` is false.
pub fn gru_backward_batch(
    p: &GruParams,
    cache: &GruCache,
    dh: &Array2<f64>,
    grads: &mut GruParams,
    want_dx: bool,
) -> (Option<Array2<f64>>, Array2<f64>) {
    let GruCache { x, h_prev, z, r, cand } = cache;
    let mut dz = Array2::zeros(dh.raw_dim());
    let mut da_h = Array2::zeros(dh.raw_dim());
    Zip::from(&mut dz)
        .and(&mut da_h)
        .and(dh)
        .and(z)
        .and(h_prev)
        .and(cand)
        .for_each(|dz, da_h, &dh, &z, &hp, &c| {
            *dz = dh * (c - hp) * z * (1.0 - z);
            *da_h = dh * z * (1.0 - c * c);
        });
    let mut dh_prev = dh * &z.mapv(|z| 1.0 - z);
    let da_z = dz;

    let gated = r * h_prev;
    grads.w_h += &da_h.t().dot(x);
    grads.u_h += &da_h.t().dot(&gated);
    grads.b_h += &da_h.sum_axis(Axis(0));
    let d_gated = da_h.dot(&p.u_h);

    let mut da_r = Array2::zeros(dh.raw_dim());
    Zip::from(&mut da_r)
        .and(&mut dh_prev)
        .and(&d_gated)
        .and(r)
        .and(h_prev)
        .for_each(|dar, dhp, &dg, &r, &hp| {
            *dar = dg * hp * r * (1.0 - r);
            *dhp += dg * r;
        });

    grads.w_z += &da_z.t().dot(x);
    grads.u_z += &da_z.t().dot(h_prev);
    grads.b_z += &da_z.sum_axis(Axis(0));
    grads.w_r += &da_r.t().dot(x);
    grads.u_r += &da_r.t().dot(h_prev);
    grads.b_r += &da_r.sum_axis(Axis(0));

    dh_prev += &da_z.dot(&p.u_z);
    dh_prev += &da_r.dot(&p.u_r);

    let dx = want_dx.then(|| da_z.dot(&p.w_z) + da_r.dot(&p.w_r) + da_h.dot(&p.w_h));
    (dx, dh_prev)
}

fn check_dims(p: &GruParams, x: &Array1<f64>, h_prev: &Array1<f64>) -> Result<()> {
    p.validate()?;
    if x.len() != p.input_dim() || h_prev.len() != p.hidden_dim() {
        return Err(shape_err(format!(
            "gru expects input {} and hidden {}, got {} and {}",
            p.input_dim(),
            p.hidden_dim(),
            x.len(),
            h_prev.len()
        )));
    }
    Ok(())
}

/// Single-vector GRU step.
pub fn gru_cell(p: &GruParams, x: &Array1<f64>, h_prev: &Array1<f64>) -> Result<Array1<f64>> {
    check_dims(p, x, h_prev)?;
    let (h, _) = gru_forward_batch(p, row_vector(x), row_vector(h_prev));
    Ok(h.row(0).to_owned())
}

/// Gradients of `⟨dh, gru_cell(p, x, h_prev)⟩` with respect to parameters, `x` and `h_prev`.
pub fn gru_cell_backward(
    p: &GruParams,
    x: &Array1<f64>,
    h_prev: &Array1<f64>,
    dh: &Array1<f64>,
) -> Result<(GruParams, Array1<f64>, Array1<f64>)> {
    check_dims(p, x, h_prev)?;
    if dh.len() != p.hidden_dim() {
        return Err(shape_err("upstream gradient length differs from hidden size"));
    }
    let (_, cache) = gru_forward_batch(p, row_vector(x), row_vector(h_prev));
    let mut grads = GruParams::zeros(p.input_dim(), p.hidden_dim());
    let (dx, dhp) = gru_backward_batch(p, &cache, &row_vector(dh).to_owned(), &mut grads, true);
    Ok((grads, dx.expect("requested").row(0).to_owned(), dhp.row(0).to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorgrad::check::{central_difference, max_relative_error};
    use crate::tensorgrad::seeded_rng;
    use rand::Rng;

    fn random_params(input: usize, hidden: usize, seed: u64) -> GruParams {
        let mut rng = seeded_rng(seed);
        let mut p = GruParams::glorot(input, hidden, &mut rng);
        for b in [&mut p.b_z, &mut p.b_r, &mut p.b_h] {
            b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        p
    }

    fn random_vec(n: usize, rng: &mut SeededRng) -> Array1<f64> {
        Array1::from_shape_simple_fn(n, || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_params_zero_state_is_fixed_point() {
        let p = GruParams::zeros(4, 3);
        let h = gru_cell(&p, &Array1::from_vec(vec![1.0, -2.0, 3.0, 0.5]), &Array1::zeros(3)).unwrap();
        assert!(h.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_params_halve_previous_state() {
        let p = GruParams::zeros(2, 3);
        let hp = Array1::from_vec(vec![0.8, -1.6, 3.0]);
        let h = gru_cell(&p, &Array1::from_vec(vec![0.3, 0.7]), &hp).unwrap();
        for (a, b) in h.iter().zip(hp.iter()) {
            assert_eq!(*a, 0.5 * b);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = GruParams::zeros(2, 3);
        assert!(gru_cell(&p, &Array1::zeros(3), &Array1::zeros(3)).is_err());
        assert!(gru_cell(&p, &Array1::zeros(2), &Array1::zeros(2)).is_err());
    }

    #[test]
    fn hidden_state_stays_bounded() {
        let mut rng = seeded_rng(3);
        for seed in 0..50 {
            let p = random_params(4, 6, seed);
            let x = random_vec(4, &mut rng) * 5.0;
            let hp = random_vec(6, &mut rng) * 3.0;
            let h = gru_cell(&p, &x, &hp).unwrap();
            for (a, b) in h.iter().zip(hp.iter()) {
                assert!(a.abs() <= b.abs().max(1.0) + 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (input, hidden) = (4, 5);
        let p = random_params(input, hidden, 17);
        let mut rng = seeded_rng(99);
        let x = random_vec(input, &mut rng);
        let hp = random_vec(hidden, &mut rng);
        let dh = random_vec(hidden, &mut rng);
        let (g, dx, dhp) = gru_cell_backward(&p, &x, &hp, &dh).unwrap();

        let mut flat = p.to_flat();
        flat.extend(x.iter());
        flat.extend(hp.iter());
        let mut analytic = g.to_flat();
        analytic.extend(dx.iter());
        analytic.extend(dhp.iter());

        let n_params = p.param_count();
        let numeric = central_difference(
            |v| {
                let mut q = p.clone();
                q.assign_flat(&v[..n_params]);
                let x = Array1::from(v[n_params..n_params + input].to_vec());
                let hp = Array1::from(v[n_params + input..].to_vec());
                gru_cell(&q, &x, &hp).unwrap().dot(&dh)
            },
            &flat,
            1e-6,
        );
        let err = max_relative_error(&analytic, &numeric);
        assert!(err <= 1e-5, "gru max relative error {err}");
    }
}

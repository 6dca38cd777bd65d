//! Python bindings: synthetic corpora, training, prediction, evaluation and
//! the vocoder. Matrices cross the boundary as lists of rows.

use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nvx::data::{gen_synthetic_corpus, read_corpus, write_corpus, SynthConfig};
use nvx::error::NvxError;
use nvx::signal::{griffin_lim, invert_mfcc, FeatureKind, FeatureSequence, MfccConfig};
use nvx::tensorgrad::AdamConfig;
use nvx::train::{
    encode_checkpoint, evaluate, load_checkpoint, save_checkpoint, split_corpus, train_model, Approach, Architecture,
    TrainConfig, TrainedPipeline,
};

fn py_err(e: NvxError) -> PyErr {
    match e {
        NvxError::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_array(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Utterances with aligned EEG, tract-variable and MFCC streams.
#[pyclass(module = "nvx")]
struct Corpus {
    inner: nvx::data::Corpus,
}

#[pymethods]
impl Corpus {
    /// Deterministic synthetic corpus sharing one latent articulatory trajectory.
    #[staticmethod]
    #[pyo3(signature = (n=200, eeg_dim=30, mfcc_dim=13, rate=100, noise=0.05, seed=0, t_min=20, t_max=40))]
    #[allow(clippy::too_many_arguments)]
    fn synthetic(
        n: usize,
        eeg_dim: usize,
        mfcc_dim: usize,
        rate: u32,
        noise: f64,
        seed: u64,
        t_min: usize,
        t_max: usize,
    ) -> PyResult<Self> {
        let cfg = SynthConfig {
            n_utterances: n,
            t_min,
            t_max,
            eeg_dim,
            mfcc_dim,
            rate,
            noise_std: noise,
            seed,
            waveforms: false,
        };
        Ok(Self { inner: gen_synthetic_corpus(&cfg).map_err(py_err)? })
    }

    /// Reads a corpus directory written by `save` or `nvx gen`.
    #[staticmethod]
    fn load(dir: &str) -> PyResult<Self> {
        Ok(Self { inner: read_corpus(dir).map_err(py_err)?.0 })
    }

    fn save(&self, dir: &str) -> PyResult<()> {
        std::fs::create_dir_all(dir)?;
        write_corpus(dir, &self.inner, None).map_err(py_err)?;
        Ok(())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.ids()
    }

    /// `{"eeg", "articulatory", "mfcc"}` matrices of one utterance.
    fn utterance<'py>(&self, py: Python<'py>, id: &str) -> PyResult<Bound<'py, PyDict>> {
        let u = self.inner.get(id).ok_or_else(|| PyValueError::new_err(format!("no utterance {id:?}")))?;
        let d = PyDict::new(py);
        d.set_item("eeg", to_rows(u.eeg.data()))?;
        d.set_item("articulatory", to_rows(u.articulatory.data()))?;
        d.set_item("mfcc", to_rows(u.mfcc.data()))?;
        Ok(d)
    }
}

/// A trained direct or two-step pipeline.
#[pyclass(module = "nvx")]
struct Pipeline {
    inner: TrainedPipeline,
}

fn parse_approach(s: &str) -> PyResult<Approach> {
    match s {
        "direct" => Ok(Approach::Direct),
        "two-step" | "two_step" => Ok(Approach::TwoStep),
        _ => Err(PyValueError::new_err(format!("unknown approach {s:?}"))),
    }
}

fn parse_architecture(s: &str) -> PyResult<Architecture> {
    match s {
        "attention" => Ok(Architecture::Attention),
        "baseline" => Ok(Architecture::Baseline),
        _ => Err(PyValueError::new_err(format!("unknown architecture {s:?}"))),
    }
}

#[pymethods]
impl Pipeline {
    /// Trains on the seeded 80/10/10 split of `corpus`.
    #[staticmethod]
    #[pyo3(signature = (corpus, approach="direct", architecture="attention", feature_set=1, epochs=2500, batch_size=100, lr=1e-3, reduce=true, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        corpus: &Corpus,
        approach: &str,
        architecture: &str,
        feature_set: u8,
        epochs: usize,
        batch_size: usize,
        lr: f64,
        reduce: bool,
        seed: u64,
    ) -> PyResult<Self> {
        let c = &corpus.inner;
        let cfg = TrainConfig {
            epochs,
            batch_size,
            seed,
            approach: parse_approach(approach)?,
            architecture: parse_architecture(architecture)?,
            feature_set,
            mfcc_dim: c.mfcc_dim().unwrap_or(13),
            rate: c.rate_hz().map_or(100, |r| r as u32),
            reduce,
            adam: AdamConfig { lr, ..AdamConfig::default() },
            ..TrainConfig::default()
        };
        let split = split_corpus(c, seed).map_err(py_err)?;
        Ok(Self { inner: train_model(c, &split, &cfg).map_err(py_err)?.pipeline })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: load_checkpoint(path).map_err(py_err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_checkpoint(&self.inner, path).map_err(py_err)
    }

    /// The checkpoint container as bytes.
    fn to_bytes(&self) -> PyResult<Vec<u8>> {
        encode_checkpoint(&self.inner).map_err(py_err)
    }

    /// Number of networks: 1 for direct, 2 for two-step.
    fn n_stages(&self) -> usize {
        self.inner.stages.len()
    }

    fn predict_mfcc(&self, eeg: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = FeatureSequence::new(to_array(eeg)?, self.inner.config.rate as f64, FeatureKind::Eeg).map_err(py_err)?;
        Ok(to_rows(self.inner.predict_mfcc(&x).map_err(py_err)?.data()))
    }

    /// Test-split MCD report as a dict.
    fn evaluate<'py>(&self, py: Python<'py>, corpus: &Corpus) -> PyResult<Bound<'py, PyDict>> {
        let split = split_corpus(&corpus.inner, self.inner.config.seed).map_err(py_err)?;
        let r = evaluate(&self.inner, &corpus.inner, &split).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("average_mcd", r.average_mcd)?;
        d.set_item("baseline_mean_predictor_mcd", r.baseline_mean_predictor_mcd)?;
        let per: Vec<(String, f64)> = r.per_utterance.into_iter().map(|s| (s.id, s.mcd)).collect();
        d.set_item("per_utterance", per)?;
        Ok(d)
    }
}

/// Mel cepstral distortion between two equal-shape MFCC matrices.
#[pyfunction]
#[pyo3(signature = (pred, truth, rate=100.0))]
fn mcd(pred: Vec<Vec<f64>>, truth: Vec<Vec<f64>>, rate: f64) -> PyResult<f64> {
    let p = FeatureSequence::new(to_array(pred)?, rate, FeatureKind::Mfcc).map_err(py_err)?;
    let t = FeatureSequence::new(to_array(truth)?, rate, FeatureKind::Mfcc).map_err(py_err)?;
    nvx::signal::mcd(&p, &t).map_err(py_err)
}

/// Inverts MFCC to a magnitude spectrogram and runs Griffin-Lim; returns 16 kHz samples.
#[pyfunction]
#[pyo3(signature = (mfcc, rate=100, iterations=60))]
fn vocode(mfcc: Vec<Vec<f64>>, rate: u32, iterations: usize) -> PyResult<Vec<f64>> {
    let m = FeatureSequence::new(to_array(mfcc)?, rate as f64, FeatureKind::Mfcc).map_err(py_err)?;
    let cfg = MfccConfig::preset(m.dim(), rate).map_err(py_err)?;
    let spec = invert_mfcc(&m, &cfg).map_err(py_err)?;
    Ok(griffin_lim(&spec, iterations, 0).map_err(py_err)?.into_samples())
}

/// Finite-difference audit of every analytic gradient: `[(op, max_rel_error, tolerance, passed)]`.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn gradcheck(seed: u64) -> Vec<(String, f64, f64, bool)> {
    nvx::gradcheck::run_suite(seed, None)
        .into_iter()
        .map(|r| (r.op, r.max_rel_error, r.tolerance, r.passed))
        .collect()
}

#[pymodule(name = "nvx")]
fn nvx_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_class::<Pipeline>()?;
    m.add_function(wrap_pyfunction!(mcd, m)?)?;
    m.add_function(wrap_pyfunction!(vocode, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    Ok(())
}

use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use nvx::data::{gen_synthetic_corpus, read_corpus, read_features, read_manifest, write_corpus, SynthConfig};
use nvx::gradcheck::{run_suite, OPS};
use nvx::signal::{griffin_lim, invert_mfcc, read_wav, write_wav, FeatureKind, FeatureSequence, MfccConfig, Waveform};
use nvx::tensorgrad::AdamConfig;
use nvx::train::{
    encode_checkpoint, evaluate, load_checkpoint, split_corpus, train_model, Approach, Architecture, History,
    MetricsReport, TrainConfig, TrainedPipeline,
};
use serde::Serialize;

use crate::report::{paper_reference, paper_reference_names, render_table};
use crate::{ApproachArg, ArchitectureArg, CliError, CliResult, EvalArgs, GenArgs, GradcheckArgs, SynthArgs, TrainArgs};

fn json_bytes<T: Serialize + ?Sized>(v: &T) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn cmd_gen(a: &GenArgs) -> CliResult<()> {
    let cfg = SynthConfig {
        n_utterances: a.n,
        t_min: a.t_min,
        t_max: a.t_max,
        eeg_dim: a.eeg_dim,
        mfcc_dim: a.mfcc,
        rate: a.rate,
        noise_std: a.noise,
        seed: a.seed,
        waveforms: a.waveforms,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if a.out.exists() {
        let empty = a.out.is_dir() && fs::read_dir(&a.out)?.next().is_none();
        if !empty {
            return Err(CliError::Data(format!("{} exists and is not an empty directory", a.out.display())));
        }
    }
    let parent = parent_dir(&a.out);
    fs::create_dir_all(&parent).map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
    let corpus = gen_synthetic_corpus(&cfg)?;
    let staging = tempfile::Builder::new()
        .prefix(".nvx-gen-")
        .tempdir_in(&parent)
        .map_err(|e| CliError::Data(format!("cannot write into {}: {e}", parent.display())))?;
    write_corpus(staging.path(), &corpus, Some(&cfg))?;
    if a.out.exists() {
        fs::remove_dir(&a.out)?;
    }
    let staged = staging.keep();
    crate::set_public_mode(&staged, 0o755)?;
    fs::rename(staged, &a.out)?;
    eprintln!("wrote {} utterances to {}", corpus.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct HistoryFile<'a> {
    config: &'a TrainConfig,
    stages: &'a [History],
}

pub fn train_config(a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
        approach: match a.approach {
            ApproachArg::Direct => Approach::Direct,
            ApproachArg::TwoStep => Approach::TwoStep,
        },
        architecture: match a.architecture {
            ArchitectureArg::Attention => Architecture::Attention,
            ArchitectureArg::Baseline => Architecture::Baseline,
        },
        feature_set: a.feature_set,
        mfcc_dim: a.mfcc,
        rate: a.rate,
        reduce: !a.no_reduce,
        kpca_max_frames: a.kpca_max_frames,
        stage2_ground_truth: a.stage2_ground_truth,
        adam: AdamConfig { lr: a.lr, ..AdamConfig::default() },
    }
}

pub fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let cfg = train_config(a);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let manifest = read_manifest(&a.data)?;
    if manifest.mfcc_dim != cfg.mfcc_dim {
        return Err(CliError::Data(format!("corpus has {} MFCC coefficients, --mfcc is {}", manifest.mfcc_dim, cfg.mfcc_dim)));
    }
    if manifest.rate_hz != cfg.rate as f64 {
        return Err(CliError::Data(format!("corpus frame rate is {} Hz, --rate is {}", manifest.rate_hz, cfg.rate)));
    }
    let (corpus, _) = read_corpus(&a.data)?;
    let split = split_corpus(&corpus, cfg.seed)?;
    let outcome = train_model(&corpus, &split, &cfg)?;
    let history_path = a.history.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".history.json");
        PathBuf::from(p)
    });
    let ckpt = encode_checkpoint(&outcome.pipeline)?;
    let history = json_bytes(&HistoryFile { config: &cfg, stages: &outcome.histories })?;
    crate::write_atomic(&a.out, &ckpt)?;
    crate::write_atomic(&history_path, &history)?;
    let last: Vec<String> = outcome
        .histories
        .iter()
        .map(|h| format!("{:.6}", h.train_loss.last().copied().unwrap_or(f64::NAN)))
        .collect();
    eprintln!("trained {} stage(s), final train loss {}; wrote {}", outcome.histories.len(), last.join(" / "), a.out.display());
    Ok(())
}

fn eeg_input_dim(p: &TrainedPipeline) -> usize {
    match &p.frontend.kpca {
        Some(k) => k.input_dim(),
        None => p.frontend.eeg_norm.dim(),
    }
}

/// Scores every checkpoint on the test split its own seed selects.
pub fn cmd_eval(a: &EvalArgs) -> CliResult<Vec<MetricsReport>> {
    let reference = match &a.paper_ref {
        Some(name) => Some(paper_reference(name).ok_or_else(|| {
            CliError::Usage(format!("unknown --paper-ref {name:?}; choose from {}", paper_reference_names().join(", ")))
        })?),
        None => None,
    };
    let pipelines = a
        .ckpts
        .iter()
        .map(|p| load_checkpoint(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))))
        .collect::<CliResult<Vec<_>>>()?;
    let (corpus, manifest) = read_corpus(&a.data)?;
    let mut reports = Vec::with_capacity(pipelines.len());
    for (path, p) in a.ckpts.iter().zip(&pipelines) {
        if p.config.mfcc_dim != manifest.mfcc_dim || p.config.rate as f64 != manifest.rate_hz || eeg_input_dim(p) != manifest.eeg_dim {
            return Err(CliError::Data(format!(
                "{} expects EEG {} / MFCC {} at {} Hz, corpus has EEG {} / MFCC {} at {} Hz",
                path.display(),
                eeg_input_dim(p),
                p.config.mfcc_dim,
                p.config.rate,
                manifest.eeg_dim,
                manifest.mfcc_dim,
                manifest.rate_hz
            )));
        }
        let split = split_corpus(&corpus, p.config.seed)?;
        reports.push(evaluate(p, &corpus, &split)?);
    }
    let json = match reports.as_slice() {
        [one] => json_bytes(one)?,
        many => json_bytes(many)?,
    };
    crate::write_atomic(&a.report, &json)?;
    let table = render_table(&reports, reference);
    match &a.table {
        Some(path) => crate::write_atomic(path, table.as_bytes())?,
        None => print!("{table}"),
    }
    Ok(reports)
}

fn vocode(m: &FeatureSequence, iterations: usize) -> CliResult<Waveform> {
    let cfg = MfccConfig::preset(m.dim(), m.rate_hz().round() as u32)?;
    Ok(griffin_lim(&invert_mfcc(m, &cfg)?, iterations, 0)?)
}

/// Ground-truth audio for a comparison: an explicit WAV or MFCC file, else
/// the utterance in the input's corpus directory whose EEG file is `input`.
/// MFCC truth is vocoded and peak-normalized like generated corpus audio.
fn truth_waveform(a: &SynthArgs) -> CliResult<Waveform> {
    let path = match &a.truth {
        Some(p) => p.clone(),
        None => {
            let dir = parent_dir(&a.input);
            let name = a.input.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let manifest = read_manifest(&dir).map_err(|e| {
                CliError::Usage(format!("--compare needs --truth or a corpus manifest next to the input ({e})"))
            })?;
            let entry = manifest
                .utterances
                .iter()
                .find(|u| u.eeg.path == name)
                .ok_or_else(|| CliError::Data(format!("{name} is not listed in {}", dir.display())))?;
            dir.join(&entry.waveform.as_ref().unwrap_or(&entry.mfcc).path)
        }
    };
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
        return Ok(read_wav(fs::File::open(&path)?)?);
    }
    let m = read_features(&path)?;
    if m.kind() != FeatureKind::Mfcc {
        return Err(CliError::Data(format!("{} holds {:?} features, not MFCC", path.display(), m.kind())));
    }
    Ok(vocode(&m, a.iterations)?.peak_normalized())
}

pub fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    if a.iterations == 0 {
        return Err(CliError::Usage("--iterations must be at least 1".into()));
    }
    let p = load_checkpoint(&a.ckpt)?;
    let eeg = read_features(&a.input)?;
    if eeg.kind() != FeatureKind::Eeg {
        return Err(CliError::Data(format!("{} holds {:?} features, not EEG", a.input.display(), eeg.kind())));
    }
    if eeg.dim() != eeg_input_dim(&p) {
        return Err(CliError::Data(format!("input has {} EEG features, checkpoint expects {}", eeg.dim(), eeg_input_dim(&p))));
    }
    if eeg.rate_hz() != p.config.rate as f64 {
        return Err(CliError::Data(format!("input is at {} Hz, checkpoint expects {} Hz", eeg.rate_hz(), p.config.rate)));
    }
    let predicted = vocode(&p.predict_mfcc(&eeg)?, a.iterations)?.peak_normalized();
    let csv = match &a.compare {
        Some(_) => {
            let actual = truth_waveform(a)?;
            let n = actual.len().min(predicted.len());
            let mut out = String::from("index,actual,predicted\n");
            for i in 0..n {
                out.push_str(&format!("{i},{},{}\n", actual.samples()[i], predicted.samples()[i]));
            }
            Some(out)
        }
        None => None,
    };
    let mut wav = Cursor::new(Vec::new());
    write_wav(&predicted, &mut wav)?;
    crate::write_atomic(&a.out, wav.get_ref())?;
    if let (Some(path), Some(csv)) = (&a.compare, csv) {
        crate::write_atomic(path, csv.as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GradcheckOutput {
    seed: u64,
    passed: bool,
    ops: Vec<nvx::gradcheck::GradCheckReport>,
}

pub fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> CliResult<()> {
    if let Some(op) = &a.perturb {
        if !OPS.contains(&op.as_str()) {
            return Err(CliError::Usage(format!("unknown op {op:?}; choose from {}", OPS.join(", "))));
        }
    }
    let ops = run_suite(a.seed, a.perturb.as_deref());
    let failed: Vec<String> = ops.iter().filter(|r| !r.passed).map(|r| r.op.clone()).collect();
    let report = GradcheckOutput { seed: a.seed, passed: failed.is_empty(), ops };
    out.write_all(&json_bytes(&report)?)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Tolerance(format!("gradient check failed for {}", failed.join(", "))))
    }
}

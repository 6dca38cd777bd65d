//! Command-line driver: corpus generation, training, evaluation, audio
//! synthesis and the gradient audit.

mod commands;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nvx::data::{SUPPORTED_EEG_DIMS, SUPPORTED_MFCC_DIMS, SUPPORTED_RATES};
use nvx::error::NvxError;

pub use commands::{cmd_eval, cmd_gen, cmd_gradcheck, cmd_synth, cmd_train};
pub use commands::train_config;
pub use report::{paper_reference, paper_reference_names, render_table, PaperReference};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("tolerance exceeded: {0}")]
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Tolerance(_) => 4,
        }
    }
}

impl From<NvxError> for CliError {
    fn from(e: NvxError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "nvx", version, about = "EEG to speech feature regression with attention")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus of feature files and a manifest.
    Gen(GenArgs),
    /// Train a direct or two-step pipeline and write a checkpoint.
    Train(TrainArgs),
    /// Score checkpoints on their test split and render the MCD table.
    Eval(EvalArgs),
    /// Predict MFCC for one EEG file and vocode it to a WAV.
    Synth(SynthArgs),
    /// Check every analytic gradient against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApproachArg {
    Direct,
    TwoStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchitectureArg {
    Attention,
    Baseline,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 30, value_parser = parse_eeg_dim)]
    pub eeg_dim: usize,
    #[arg(long, default_value_t = 13, value_parser = parse_mfcc_dim)]
    pub mfcc: usize,
    #[arg(long, default_value_t = 100, value_parser = parse_rate)]
    pub rate: u32,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 20)]
    pub t_min: usize,
    #[arg(long, default_value_t = 40)]
    pub t_max: usize,
    /// Also vocode every utterance's MFCC to a WAV.
    #[arg(long)]
    pub waveforms: bool,
    #[arg(long, env = "NVX_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = ApproachArg::Direct)]
    pub approach: ApproachArg,
    #[arg(long, value_enum, default_value_t = ArchitectureArg::Attention)]
    pub architecture: ArchitectureArg,
    /// Selects the kernel PCA width: 1 → 30, 2 → 50, 3 → 93.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub feature_set: u8,
    #[arg(long, default_value_t = 13, value_parser = parse_mfcc_dim)]
    pub mfcc: usize,
    #[arg(long, default_value_t = 100, value_parser = parse_rate)]
    pub rate: u32,
    #[arg(long, default_value_t = 2500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Skip kernel PCA and feed the EEG features as they are.
    #[arg(long)]
    pub no_reduce: bool,
    #[arg(long, default_value_t = 1000)]
    pub kpca_max_frames: usize,
    /// Train the second stage on ground-truth tract variables.
    #[arg(long)]
    pub stage2_ground_truth: bool,
    #[arg(long, env = "NVX_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Loss history JSON; defaults to `<out>.history.json`.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long = "ckpt", required = true)]
    pub ckpts: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// Rendered text table; printed to stdout when omitted.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Adds the published numbers of a subject as display-only columns.
    #[arg(long)]
    pub paper_ref: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// EEG feature file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV of `index,actual,predicted` samples.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Ground truth for `--compare`: a WAV or an MFCC feature file. Looked up
    /// in the input's corpus manifest when omitted.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    pub iterations: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[arg(long, env = "NVX_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Corrupt the analytic gradient of one op (harness self-test).
    #[arg(long, hide = true)]
    pub perturb: Option<String>,
}

fn parse_choice<T: std::str::FromStr + PartialEq + std::fmt::Display + Copy>(s: &str, allowed: &[T]) -> Result<T, String> {
    let listed = allowed.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ");
    match s.parse::<T>() {
        Ok(v) if allowed.contains(&v) => Ok(v),
        _ => Err(format!("expected one of {listed}")),
    }
}

fn parse_eeg_dim(s: &str) -> Result<usize, String> {
    parse_choice(s, &SUPPORTED_EEG_DIMS)
}

fn parse_mfcc_dim(s: &str) -> Result<usize, String> {
    parse_choice(s, &SUPPORTED_MFCC_DIMS)
}

fn parse_rate(s: &str) -> Result<u32, String> {
    parse_choice(s, &SUPPORTED_RATES)
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Data(format!("cannot write next to {}: {e}", path.display())))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    set_public_mode(tmp.path(), 0o644)?;
    tmp.persist(path).map_err(|e| CliError::Data(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Temporary files and directories are created owner-only; outputs get ordinary modes.
pub(crate) fn set_public_mode(path: &Path, mode: u32) -> CliResult<()> {
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(path, std::fs::Permissions::from_mode(mode))?;
    }
    #[cfg(not(unix))]
    let _ = (path, mode);
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a).map(|_| ()),
        Command::Synth(a) => cmd_synth(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a, &mut std::io::stdout()),
    }
}

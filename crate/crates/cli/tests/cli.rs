use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nvx::data::{read_manifest, MANIFEST_FILE};
use tempfile::TempDir;

fn nvx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvx")).env_remove("NVX_SEED").args(args).output().expect("spawn nvx")
}

fn ok(args: &[&str]) -> Output {
    let out = nvx(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(args: &[&str]) -> i32 {
    nvx(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(dir: &TempDir, extra: &[&str]) -> PathBuf {
    let out = dir.path().join("corpus");
    let mut args = vec!["gen", "--out", s(&out), "--n", "12", "--t-min", "6", "--t-max", "9", "--seed", "3"];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

fn train(dir: &TempDir, data: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let ckpt = dir.path().join(name);
    let mut args = vec!["train", "--data", s(data), "--out", s(&ckpt), "--epochs", "2", "--batch-size", "4", "--kpca-max-frames", "60"];
    args.extend_from_slice(extra);
    ok(&args);
    ckpt
}

#[test]
fn gen_writes_a_manifest_and_one_file_per_stream() {
    let dir = TempDir::new().unwrap();
    let data = corpus(&dir, &["--waveforms"]);
    let m = read_manifest(&data).unwrap();
    assert_eq!((m.eeg_dim, m.mfcc_dim, m.rate_hz, m.utterances.len()), (30, 13, 100.0, 12));
    for u in &m.utterances {
        assert!((6..=9).contains(&u.frames));
        for f in [&u.eeg, &u.articulatory, &u.mfcc, u.waveform.as_ref().unwrap()] {
            assert!(data.join(&f.path).is_file());
        }
    }
}

#[test]
fn gen_is_deterministic_per_seed() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (da, db) = (corpus(&a, &[]), corpus(&b, &[]));
    let m = read_manifest(&da).unwrap();
    assert_eq!(std::fs::read(da.join(MANIFEST_FILE)).unwrap(), std::fs::read(db.join(MANIFEST_FILE)).unwrap());
    for u in &m.utterances {
        assert_eq!(std::fs::read(da.join(&u.eeg.path)).unwrap(), std::fs::read(db.join(&u.eeg.path)).unwrap());
    }
}

#[test]
fn gen_supports_the_wide_mfcc_configuration() {
    let dir = TempDir::new().unwrap();
    let data = corpus(&dir, &["--mfcc", "128", "--rate", "32"]);
    let m = read_manifest(&data).unwrap();
    assert_eq!((m.mfcc_dim, m.rate_hz), (128, 32.0));
}

#[test]
fn gen_refuses_a_non_empty_output_directory() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("keep.txt"), "x").unwrap();
    assert_eq!(code(&["gen", "--out", s(dir.path()), "--n", "4"]), 3);
    assert!(dir.path().join("keep.txt").exists());
}

#[test]
fn gen_rejects_unsupported_dimensions_as_usage_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c");
    assert_eq!(code(&["gen", "--out", s(&out), "--eeg-dim", "31"]), 2);
    assert_eq!(code(&["gen", "--out", s(&out), "--t-min", "9", "--t-max", "3"]), 2);
}

#[test]
fn train_writes_one_stage_direct_and_two_stage_pipelines() {
    let dir = TempDir::new().unwrap();
    let data = corpus(&dir, &[]);
    for (approach, stages) in [("direct", 1), ("two-step", 2)] {
        let ckpt = train(&dir, &data, approach, &["--approach", approach]);
        let p = nvx::train::load_checkpoint(&ckpt).unwrap();
        assert_eq!(p.stages.len(), stages);
        let history: serde_json::Value =
            serde_json::from_slice(&std::fs::read(format!("{}.history.json", ckpt.display())).unwrap()).unwrap();
        assert_eq!(history["stages"].as_array().unwrap().len(), stages);
        assert_eq!(history["stages"][0]["train_loss"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn train_rejects_flags_that_contradict_the_corpus() {
    let dir = TempDir::new().unwrap();
    let data = corpus(&dir, &[]);
    let out = dir.path().join("x.ckpt");
    assert_eq!(code(&["train", "--data", s(&data), "--out", s(&out), "--mfcc", "128", "--rate", "32"]), 3);
    assert_eq!(code(&["train", "--data", s(&data), "--out", s(&out), "--feature-set", "4"]), 2);
    assert_eq!(code(&["train", "--data", s(&data), "--out", s(&out), "--epochs", "0"]), 2);
    assert!(!out.exists());
}

#[test]
fn eval_writes_metrics_and_a_table() {
    let dir = TempDir::new().unwrap();
    let data = corpus(&dir, &[]);
    let direct = train(&dir, &data, "d.ckpt", &[]);
    let two = train(&dir, &data, "t.ckpt", &["--approach", "two-step"]);
    let report = dir.path().join("m.json");
    let out = ok(&["eval", "--ckpt", s(&direct), "--ckpt", s(&two), "--data", s(&data), "--report", s(&report), "--paper-ref", "subject1"]);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let reports = json.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    for r in reports {
        assert!(r["average_mcd"].as_f64().unwrap().is_finite());
        assert!(r["baseline_mean_predictor_mcd"].as_f64().unwrap() > 0.0);
    }
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("Set 1"));
    assert!(table.contains("1st Approach (published)"));

    let single = dir.path().join("one.json");
    let table_path = dir.path().join("table.txt");
    ok(&["eval", "--ckpt", s(&direct), "--data", s(&data), "--report", s(&single), "--table", s(&table_path)]);
    let one: serde_json::Value = serde_json::from_slice(&std::fs::read(&single).unwrap()).unwrap();
    assert!(one.is_object());
    assert!(std::fs::read_to_string(&table_path).unwrap().contains("Average MCD 1st Approach"));
}

#[test]
fn eval_accepts_the_wide_mfcc_reference_and_rejects_unknown_ones() {
    let dir = TempDir::new().unwrap();
    let data = corpus(&dir, &["--mfcc", "128", "--rate", "32"]);
    let ckpt = train(&dir, &data, "w.ckpt", &["--mfcc", "128", "--rate", "32"]);
    let report = dir.path().join("m.json");
    let out = ok(&["eval", "--ckpt", s(&ckpt), "--data", s(&data), "--report", s(&report), "--paper-ref", "subject1-mfcc128"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("subject1-mfcc128"));
    assert_eq!(code(&["eval", "--ckpt", s(&ckpt), "--data", s(&data), "--report", s(&report), "--paper-ref", "subject9"]), 2);
}

#[test]
fn eval_rejects_a_corpus_of_another_shape() {
    let dir = TempDir::new().unwrap();
    let data = corpus(&dir, &[]);
    let ckpt = train(&dir, &data, "d.ckpt", &[]);
    let other = TempDir::new().unwrap();
    let wide = corpus(&other, &["--eeg-dim", "50"]);
    assert_eq!(code(&["eval", "--ckpt", s(&ckpt), "--data", s(&wide), "--report", s(&dir.path().join("m.json"))]), 3);
}

#[test]
fn synth_writes_a_wav_and_a_comparison_csv() {
    let dir = TempDir::new().unwrap();
    let data = corpus(&dir, &[]);
    let ckpt = train(&dir, &data, "d.ckpt", &[]);
    let m = read_manifest(&data).unwrap();
    let input = data.join(&m.utterances[0].eeg.path);
    let wav = dir.path().join("out.wav");
    let csv = dir.path().join("cmp.csv");
    ok(&["synth", "--ckpt", s(&ckpt), "--input", s(&input), "--out", s(&wav), "--compare", s(&csv), "--iterations", "8"]);
    let bytes = std::fs::read(&wav).unwrap();
    assert_eq!(&bytes[..4], b"RIFF");
    assert_eq!(u16::from_le_bytes([bytes[22], bytes[23]]), 1);
    assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 16000);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,actual,predicted"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    for (i, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 3);
        assert_eq!(cols[0].parse::<usize>().unwrap(), i);
        assert!(cols[1].parse::<f64>().unwrap().abs() <= 1.0);
        assert!(cols[2].parse::<f64>().unwrap().abs() <= 1.0);
    }
}

#[test]
fn synth_rejects_non_eeg_input() {
    let dir = TempDir::new().unwrap();
    let data = corpus(&dir, &[]);
    let ckpt = train(&dir, &data, "d.ckpt", &[]);
    let m = read_manifest(&data).unwrap();
    let input = data.join(&m.utterances[0].mfcc.path);
    assert_eq!(code(&["synth", "--ckpt", s(&ckpt), "--input", s(&input), "--out", s(&dir.path().join("o.wav"))]), 3);
}

#[test]
fn gradcheck_reports_json_and_fails_on_a_perturbed_gradient() {
    let out = ok(&["gradcheck", "--seed", "0"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["passed"], true);
    assert_eq!(json["ops"].as_array().unwrap().len(), 5);
    let bad = nvx(&["gradcheck", "--perturb", "dense"]);
    assert_eq!(bad.status.code(), Some(4));
    let json: serde_json::Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(json["passed"], false);
    assert_eq!(code(&["gradcheck", "--perturb", "nope"]), 2);
}

use ndarray::{concatenate, Array2, Axis};
use nvx::data::*;
use nvx::error::NvxError;
use nvx::signal::{FeatureKind, FeatureSequence};
use proptest::prelude::*;

fn stacked(c: &Corpus, f: impl Fn(&Utterance) -> Array2<f64>) -> Array2<f64> {
    let parts: Vec<Array2<f64>> = c.utterances().iter().map(f).collect();
    concatenate(Axis(0), &parts.iter().map(|p| p.view()).collect::<Vec<_>>()).unwrap()
}

fn with_bias(x: Array2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[x.view(), Array2::ones((x.nrows(), 1)).view()]).unwrap()
}

fn variance(y: &Array2<f64>) -> f64 {
    let m = y.mean_axis(Axis(0)).unwrap();
    (y - &m).mapv(|v| v * v).mean().unwrap()
}

fn noise_free(eeg_dim: usize, mfcc_dim: usize) -> SynthConfig {
    SynthConfig { n_utterances: 20, eeg_dim, mfcc_dim, noise_std: 0.0, seed: 5, ..SynthConfig::default() }
}

#[test]
fn noise_free_acoustics_are_an_exact_function_of_the_tract_variables() {
    for mfcc_dim in [13, 128] {
        let cfg = noise_free(30, mfcc_dim);
        let c = gen_synthetic_corpus(&cfg).unwrap();
        let maps = SynthMaps::new(&cfg);
        let x = with_bias(stacked(&c, |u| maps.hidden(u.articulatory.data())));
        let y = stacked(&c, |u| u.mfcc.data().clone());
        let fit = ridge_oracle(&x, &y, 1e-12).unwrap();
        assert!(fit.residual <= 1e-12 * variance(&y), "residual {}", fit.residual);
    }
}

#[test]
fn acoustic_map_is_not_linear_in_the_tract_variables() {
    let c = gen_synthetic_corpus(&noise_free(30, 13)).unwrap();
    let x = with_bias(stacked(&c, |u| u.articulatory.data().clone()));
    let y = stacked(&c, |u| u.mfcc.data().clone());
    let fit = ridge_oracle(&x, &y, 1e-9).unwrap();
    assert!(fit.residual > 1e-3 * variance(&y));
}

#[test]
fn tract_variables_are_recoverable_from_noise_free_eeg() {
    for eeg_dim in SUPPORTED_EEG_DIMS {
        let c = gen_synthetic_corpus(&noise_free(eeg_dim, 13)).unwrap();
        let x = stacked(&c, |u| u.eeg.data().clone());
        let y = stacked(&c, |u| u.articulatory.data().clone());
        let fit = ridge_oracle(&x, &y, 1e-12).unwrap();
        assert!(fit.residual <= 1e-16, "eeg {eeg_dim}: residual {}", fit.residual);
    }
}

#[test]
fn eeg_noise_is_the_unexplained_variance() {
    let cfg = SynthConfig { n_utterances: 60, noise_std: 0.05, seed: 9, ..SynthConfig::default() };
    let c = gen_synthetic_corpus(&cfg).unwrap();
    let x = stacked(&c, |u| u.articulatory.data().clone());
    let y = stacked(&c, |u| u.eeg.data().clone());
    let fit = ridge_oracle(&x, &y, 0.0).unwrap();
    let expected = 0.05f64.powi(2);
    assert!((fit.residual - expected).abs() <= 0.1 * expected, "residual {}", fit.residual);
}

fn kind_for(d: usize) -> FeatureKind {
    match d {
        6 => FeatureKind::Articulatory,
        13 | 128 => FeatureKind::Mfcc,
        _ => FeatureKind::Eeg,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feature_files_round_trip_to_f32(
        t in 1usize..=64,
        d in prop::sample::select(vec![6usize, 13, 30, 50, 93, 128]),
        rate in prop::sample::select(vec![100.0f64, 32.0]),
        seed in any::<u64>(),
    ) {
        let mut state = seed | 1;
        let data = Array2::from_shape_simple_fn((t, d), || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 20.0 - 10.0
        });
        let f = FeatureSequence::new(data.clone(), rate, kind_for(d)).unwrap();
        let bytes = encode_features(&f).unwrap();
        prop_assert_eq!(bytes.len(), 25 + t * d * 4 + 4);
        let g = decode_features(&bytes).unwrap();
        prop_assert_eq!(g.kind(), f.kind());
        prop_assert_eq!(g.rate_hz(), rate);
        prop_assert_eq!(g.data().dim(), (t, d));
        for (a, b) in g.data().iter().zip(data.iter()) {
            prop_assert_eq!(*a, *b as f32 as f64);
        }
    }
}

#[test]
fn corpus_survives_a_disk_round_trip() {
    let cfg = SynthConfig { n_utterances: 4, t_min: 5, t_max: 8, waveforms: true, seed: 2, ..SynthConfig::default() };
    let c = gen_synthetic_corpus(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = write_corpus(dir.path(), &c, Some(&cfg)).unwrap();
    let (back, manifest) = read_corpus(dir.path()).unwrap();
    assert_eq!(manifest, written);
    assert_eq!(manifest.synth, Some(cfg));
    assert_eq!(back.ids(), c.ids());
    for (a, b) in c.utterances().iter().zip(back.utterances()) {
        for (x, y) in [(&a.eeg, &b.eeg), (&a.articulatory, &b.articulatory), (&a.mfcc, &b.mfcc)] {
            assert_eq!(x.kind(), y.kind());
            assert_eq!(x.data().mapv(|v| v as f32 as f64), *y.data());
        }
        let (wa, wb) = (a.waveform.as_ref().unwrap(), b.waveform.as_ref().unwrap());
        assert_eq!(wa.len(), wb.len());
        assert!(wa.samples().iter().zip(wb.samples()).all(|(p, q)| (p - q).abs() <= 1.0 / 32767.0));
    }
}

#[test]
fn same_seed_writes_identical_manifests() {
    let cfg = SynthConfig { n_utterances: 5, t_min: 5, t_max: 9, seed: 4, ..SynthConfig::default() };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_corpus(d1.path(), &gen_synthetic_corpus(&cfg).unwrap(), Some(&cfg)).unwrap();
    write_corpus(d2.path(), &gen_synthetic_corpus(&cfg).unwrap(), Some(&cfg)).unwrap();
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(read(&d1), read(&d2));
}

#[test]
fn tampered_corpus_file_fails_its_checksum() {
    let cfg = SynthConfig { n_utterances: 3, t_min: 5, t_max: 6, seed: 1, ..SynthConfig::default() };
    let dir = tempfile::tempdir().unwrap();
    let m = write_corpus(dir.path(), &gen_synthetic_corpus(&cfg).unwrap(), None).unwrap();
    let path = dir.path().join(&m.utterances[1].mfcc.path);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[30] ^= 1;
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(read_corpus(dir.path()), Err(NvxError::Checksum { .. })));
}

#[test]
fn mfcc128_corpus_declares_its_width_and_rate() {
    let cfg = SynthConfig { n_utterances: 2, t_min: 4, t_max: 5, mfcc_dim: 128, rate: 32, ..SynthConfig::default() };
    let c = gen_synthetic_corpus(&cfg).unwrap();
    for u in c.utterances() {
        let back = decode_features(&encode_features(&u.mfcc).unwrap()).unwrap();
        assert_eq!((back.dim(), back.rate_hz()), (128, 32.0));
    }
}

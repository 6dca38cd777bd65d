use std::collections::HashSet;
use std::fs;
use std::io::Cursor;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{decode_features, encode_features};
use super::synth::SynthConfig;
use crate::error::{invalid, NvxError, Result};
use crate::signal::{read_wav, write_wav, FeatureKind, FeatureSequence, Waveform};

/// One parallel recording: EEG features, tract variables and MFCC on a shared frame grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub eeg: FeatureSequence,
    pub articulatory: FeatureSequence,
    pub mfcc: FeatureSequence,
    pub waveform: Option<Waveform>,
}

impl Utterance {
    pub fn new(
        id: impl Into<String>,
        eeg: FeatureSequence,
        articulatory: FeatureSequence,
        mfcc: FeatureSequence,
        waveform: Option<Waveform>,
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(invalid("utterance id is empty"));
        }
        for (f, kind) in [(&eeg, FeatureKind::Eeg), (&articulatory, FeatureKind::Articulatory), (&mfcc, FeatureKind::Mfcc)] {
            if f.kind() != kind {
                return Err(invalid(format!("{id}: expected {kind:?} features, got {:?}", f.kind())));
            }
            if f.frames() != eeg.frames() || f.rate_hz() != eeg.rate_hz() {
                return Err(invalid(format!("{id}: feature streams disagree on frame count or rate")));
            }
        }
        Ok(Self { id, eeg, articulatory, mfcc, waveform })
    }

    pub fn frames(&self) -> usize {
        self.eeg.frames()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    utterances: Vec<Utterance>,
}

impl Corpus {
    /// Ids must be unique and all utterances share one EEG and MFCC width and rate.
    pub fn new(utterances: Vec<Utterance>) -> Result<Self> {
        let mut seen = HashSet::new();
        for u in &utterances {
            if !seen.insert(u.id.as_str()) {
                return Err(invalid(format!("duplicate utterance id {}", u.id)));
            }
        }
        if let Some(first) = utterances.first() {
            for u in &utterances {
                if u.eeg.dim() != first.eeg.dim() || u.mfcc.dim() != first.mfcc.dim() || u.eeg.rate_hz() != first.eeg.rate_hz() {
                    return Err(invalid(format!("{} differs from {} in dims or rate", u.id, first.id)));
                }
            }
        }
        Ok(Self { utterances })
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn utterances_mut(&mut self) -> &mut [Utterance] {
        &mut self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.utterances.iter().map(|u| u.id.clone()).collect()
    }

    pub fn eeg_dim(&self) -> Option<usize> {
        self.utterances.first().map(|u| u.eeg.dim())
    }

    pub fn mfcc_dim(&self) -> Option<usize> {
        self.utterances.first().map(|u| u.mfcc.dim())
    }

    pub fn rate_hz(&self) -> Option<f64> {
        self.utterances.first().map(|u| u.eeg.rate_hz())
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "nvx-corpus";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub frames: usize,
    pub eeg: FileRef,
    pub articulatory: FileRef,
    pub mfcc: FileRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveform: Option<FileRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub eeg_dim: usize,
    pub mfcc_dim: usize,
    pub rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    pub utterances: Vec<ManifestEntry>,
}

fn put(dir: &Path, name: String, bytes: &[u8]) -> Result<FileRef> {
    fs::write(dir.join(&name), bytes)?;
    Ok(FileRef { path: name, crc32: crc32fast::hash(bytes) })
}

fn fetch(dir: &Path, r: &FileRef) -> Result<Vec<u8>> {
    let bytes = fs::read(dir.join(&r.path))?;
    let computed = crc32fast::hash(&bytes);
    if computed != r.crc32 {
        return Err(NvxError::Checksum { stored: r.crc32, computed });
    }
    Ok(bytes)
}

/// Writes every stream as its own file plus `manifest.json` into an existing directory.
pub fn write_corpus(dir: impl AsRef<Path>, corpus: &Corpus, synth: Option<&SynthConfig>) -> Result<Manifest> {
    let dir = dir.as_ref();
    let first = corpus.utterances().first().ok_or_else(|| invalid("cannot write an empty corpus"))?;
    let mut entries = Vec::with_capacity(corpus.len());
    for u in corpus.utterances() {
        let waveform = match &u.waveform {
            Some(w) => {
                let mut buf = Cursor::new(Vec::new());
                write_wav(w, &mut buf)?;
                Some(put(dir, format!("{}.wav", u.id), buf.get_ref())?)
            }
            None => None,
        };
        entries.push(ManifestEntry {
            id: u.id.clone(),
            frames: u.frames(),
            eeg: put(dir, format!("{}.eeg.fmat", u.id), &encode_features(&u.eeg)?)?,
            articulatory: put(dir, format!("{}.tv.fmat", u.id), &encode_features(&u.articulatory)?)?,
            mfcc: put(dir, format!("{}.mfcc.fmat", u.id), &encode_features(&u.mfcc)?)?,
            waveform,
        });
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        version: 1,
        eeg_dim: first.eeg.dim(),
        mfcc_dim: first.mfcc.dim(),
        rate_hz: first.eeg.rate_hz(),
        synth: synth.cloned(),
        utterances: entries,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.as_ref().join(MANIFEST_FILE))?)?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(NvxError::Malformed(format!("manifest format {:?}", manifest.format)));
    }
    if manifest.version != 1 {
        return Err(NvxError::VersionMismatch { expected: 1, found: manifest.version });
    }
    Ok(manifest)
}

/// Loads a corpus written by [`write_corpus`], verifying every file checksum.
pub fn read_corpus(dir: impl AsRef<Path>) -> Result<(Corpus, Manifest)> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut utterances = Vec::with_capacity(manifest.utterances.len());
    for e in &manifest.utterances {
        let waveform = match &e.waveform {
            Some(r) => Some(read_wav(Cursor::new(fetch(dir, r)?))?),
            None => None,
        };
        let u = Utterance::new(
            e.id.clone(),
            decode_features(&fetch(dir, &e.eeg)?)?,
            decode_features(&fetch(dir, &e.articulatory)?)?,
            decode_features(&fetch(dir, &e.mfcc)?)?,
            waveform,
        )?;
        if u.frames() != e.frames || u.eeg.dim() != manifest.eeg_dim || u.mfcc.dim() != manifest.mfcc_dim {
            return Err(NvxError::Malformed(format!("{} does not match the manifest", e.id)));
        }
        utterances.push(u);
    }
    Ok((Corpus::new(utterances)?, manifest))
}

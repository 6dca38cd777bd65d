//! `NVXC` checkpoint container.
//!
//! Layout (little-endian): magic `NVXC`, version `u32`, JSON header length
//! `u32` and bytes, then tensor records `{name length u32, name, rows u32,
//! cols u32, rows·cols f64}` up to a trailing CRC32 of every preceding byte.
//! All floating-point state lives in tensor records so a round trip is
//! bit-exact; the JSON header carries the configuration and layer widths.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::pipeline::{Architecture, Frontend, Network, TrainConfig, TrainedPipeline};
use crate::error::{NvxError, Result};
use crate::model::{BaselineParams, ModelDims, ModelParams};
use crate::reduce::{Kernel, KpcaModel};
use crate::signal::NormStats;
use crate::tensorgrad::ParamTensors;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"NVXC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StageHeader {
    architecture: Architecture,
    d_in: usize,
    encoder_hidden: usize,
    #[serde(default)]
    decoder_hidden: usize,
    d_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KernelKind {
    Rbf,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct KpcaHeader {
    kernel: KernelKind,
    training_frames: usize,
    input_dim: usize,
    n_components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    stages: Vec<StageHeader>,
    kpca: Option<KpcaHeader>,
}

struct Record {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

fn malformed(msg: impl Into<String>) -> NvxError {
    NvxError::Malformed(msg.into())
}

fn push_record(out: &mut Vec<u8>, name: &str, rows: usize, cols: usize, values: &[f64]) {
    debug_assert_eq!(rows * cols, values.len());
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn push_norm(out: &mut Vec<u8>, stream: &str, n: &NormStats) {
    push_record(out, &format!("norm.{stream}.mean"), 1, n.dim(), &n.mean);
    push_record(out, &format!("norm.{stream}.std"), 1, n.dim(), &n.std);
}

fn stage_header(net: &Network) -> StageHeader {
    match net {
        Network::Attention(m) => {
            let d = m.dims();
            StageHeader {
                architecture: Architecture::Attention,
                d_in: d.d_in,
                encoder_hidden: d.encoder_hidden,
                decoder_hidden: d.decoder_hidden,
                d_out: d.d_out,
            }
        }
        Network::Baseline(b) => StageHeader {
            architecture: Architecture::Baseline,
            d_in: b.encoder.input_dim(),
            encoder_hidden: b.encoder.hidden_dim(),
            decoder_hidden: 0,
            d_out: b.head.output_dim(),
        },
    }
}

pub fn encode_checkpoint(p: &TrainedPipeline) -> Result<Vec<u8>> {
    p.validate()?;
    let kpca = p.frontend.kpca.as_ref();
    let header = Header {
        config: p.config.clone(),
        stages: p.stages.iter().map(stage_header).collect(),
        kpca: kpca.map(|k| KpcaHeader {
            kernel: match k.kernel() {
                Kernel::Rbf { .. } => KernelKind::Rbf,
                Kernel::Linear => KernelKind::Linear,
            },
            training_frames: k.training_frames().nrows(),
            input_dim: k.input_dim(),
            n_components: k.n_components(),
        }),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (i, net) in p.stages.iter().enumerate() {
        for (name, rows, cols, values) in net.tensors() {
            push_record(&mut out, &format!("stage{i}.{name}"), rows, cols, values);
        }
    }
    push_norm(&mut out, "eeg", &p.frontend.eeg_norm);
    push_norm(&mut out, "tv", &p.frontend.tv_norm);
    push_norm(&mut out, "mfcc", &p.frontend.mfcc_norm);
    if let Some(k) = kpca {
        let frames = k.training_frames();
        push_record(&mut out, "kpca.frames", frames.nrows(), frames.ncols(), frames.as_slice().expect("standard layout"));
        let v = k.centered_eigenvectors();
        push_record(&mut out, "kpca.eigenvectors", v.nrows(), v.ncols(), v.as_slice().expect("standard layout"));
        push_record(&mut out, "kpca.eigenvalues", 1, k.n_components(), k.eigenvalues());
        if let Kernel::Rbf { gamma } = k.kernel() {
            push_record(&mut out, "kpca.gamma", 1, 1, &[gamma]);
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(NvxError::Truncated(format!("record at byte {} overruns the file", self.pos))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

fn take_record(records: &mut BTreeMap<String, Record>, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>> {
    let r = records.remove(name).ok_or_else(|| malformed(format!("missing tensor {name}")))?;
    if (r.rows, r.cols) != (rows, cols) {
        return Err(malformed(format!("tensor {name} is {}×{}, expected {rows}×{cols}", r.rows, r.cols)));
    }
    Ok(r.values)
}

fn take_any(records: &mut BTreeMap<String, Record>, name: &str) -> Result<Record> {
    records.remove(name).ok_or_else(|| malformed(format!("missing tensor {name}")))
}

fn take_norm(records: &mut BTreeMap<String, Record>, stream: &str) -> Result<NormStats> {
    let mean = take_any(records, &format!("norm.{stream}.mean"))?;
    let std = take_record(records, &format!("norm.{stream}.std"), 1, mean.cols)?;
    if mean.rows != 1 {
        return Err(malformed(format!("norm.{stream}.mean must be a row")));
    }
    Ok(NormStats { mean: mean.values, std })
}

fn load_network(records: &mut BTreeMap<String, Record>, i: usize, h: &StageHeader) -> Result<Network> {
    let mut net = match h.architecture {
        Architecture::Attention => Network::Attention(ModelParams::zeros(ModelDims {
            d_in: h.d_in,
            encoder_hidden: h.encoder_hidden,
            decoder_hidden: h.decoder_hidden,
            d_out: h.d_out,
        })),
        Architecture::Baseline => Network::Baseline(BaselineParams::zeros(h.d_in, h.encoder_hidden, h.d_out)),
    };
    let shapes: Vec<(String, usize, usize)> = net.tensors().into_iter().map(|(n, r, c, _)| (n, r, c)).collect();
    let mut flat = Vec::with_capacity(net.param_count());
    for (name, rows, cols) in shapes {
        flat.extend(take_record(records, &format!("stage{i}.{name}"), rows, cols)?);
    }
    net.assign_flat(&flat);
    Ok(net)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<TrainedPipeline> {
    if bytes.len() < 4 {
        return Err(NvxError::Truncated(format!("{} bytes", bytes.len())));
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if found != CHECKPOINT_MAGIC {
        return Err(NvxError::BadMagic { expected: CHECKPOINT_MAGIC, found });
    }
    if bytes.len() < 16 {
        return Err(NvxError::Truncated(format!("{} bytes", bytes.len())));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(NvxError::Checksum { stored, computed });
    }
    let mut rd = Reader { bytes: body, pos: 4 };
    let version = rd.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(NvxError::VersionMismatch { expected: CHECKPOINT_VERSION, found: version });
    }
    let json_len = rd.u32()? as usize;
    let header: Header = serde_json::from_slice(rd.take(json_len)?)?;
    let mut records = BTreeMap::new();
    while rd.pos < body.len() {
        let name_len = rd.u32()? as usize;
        let name = String::from_utf8(rd.take(name_len)?.to_vec()).map_err(|_| malformed("tensor name is not UTF-8"))?;
        let rows = rd.u32()? as usize;
        let cols = rd.u32()? as usize;
        let n = rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or_else(|| malformed("tensor too large"))?;
        let values = rd.take(n)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if records.insert(name.clone(), Record { rows, cols, values }).is_some() {
            return Err(malformed(format!("duplicate tensor {name}")));
        }
    }
    let stages = header
        .stages
        .iter()
        .enumerate()
        .map(|(i, h)| load_network(&mut records, i, h))
        .collect::<Result<Vec<_>>>()?;
    let eeg_norm = take_norm(&mut records, "eeg")?;
    let tv_norm = take_norm(&mut records, "tv")?;
    let mfcc_norm = take_norm(&mut records, "mfcc")?;
    let kpca = match &header.kpca {
        None => None,
        Some(k) => {
            let frames = take_record(&mut records, "kpca.frames", k.training_frames, k.input_dim)?;
            let vectors = take_record(&mut records, "kpca.eigenvectors", k.training_frames, k.n_components)?;
            let values = take_record(&mut records, "kpca.eigenvalues", 1, k.n_components)?;
            let kernel = match k.kernel {
                KernelKind::Linear => Kernel::Linear,
                KernelKind::Rbf => Kernel::Rbf { gamma: take_record(&mut records, "kpca.gamma", 1, 1)?[0] },
            };
            let shape = |r, c, v| Array2::from_shape_vec((r, c), v).map_err(|e| malformed(e.to_string()));
            Some(KpcaModel::from_parts(
                shape(k.training_frames, k.input_dim, frames)?,
                kernel,
                shape(k.training_frames, k.n_components, vectors)?,
                values,
            )?)
        }
    };
    if let Some(extra) = records.keys().next() {
        return Err(malformed(format!("unexpected tensor {extra}")));
    }
    let pipeline = TrainedPipeline {
        config: header.config,
        frontend: Frontend { kpca, eeg_norm, tv_norm, mfcc_norm },
        stages,
    };
    pipeline.validate().map_err(|e| malformed(e.to_string()))?;
    Ok(pipeline)
}

pub fn save_checkpoint(p: &TrainedPipeline, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(p)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainedPipeline> {
    decode_checkpoint(&fs::read(path)?)
}

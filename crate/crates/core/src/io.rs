//! Binary artifact containers: datasets, chains and checkpoints.
//!
//! Every artifact is one file with the layout
//!
//! ```text
//! magic (8 bytes) | header length (u64 LE) | header JSON | payload
//! ```
//!
//! where the payload is a concatenation of float64 little-endian sections
//! whose names and lengths are listed in the header under `"sections"`.
//! Headers are JSON with sorted keys, so identical inputs produce
//! byte-identical files.

use crate::error::{Error, Result};
use crate::geometry::BoundaryPoint;
use crate::sampler::{ChainOutput, ChainState, Checkpoint, SamplerConfig};
use crate::stats::Dataset;
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

pub const DATASET_MAGIC: &[u8; 8] = b"NABXDS01";
pub const CHAIN_MAGIC: &[u8; 8] = b"NABXCH01";
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NABXCK01";

/// Writes a container file.
pub fn write_container(
    path: &Path,
    magic: &[u8; 8],
    mut header: Value,
    sections: &[(&str, &[f64])],
) -> Result<()> {
    let obj = header
        .as_object_mut()
        .ok_or_else(|| Error::Format("container header must be a JSON object".into()))?;
    obj.insert(
        "sections".into(),
        Value::Array(
            sections
                .iter()
                .map(|(name, data)| json!({"name": name, "len": data.len()}))
                .collect(),
        ),
    );
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::Format(format!("header serialization: {e}")))?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(magic)?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    file.write_all(&header_bytes)?;
    for (_, data) in sections {
        for v in *data {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    file.flush()?;
    Ok(())
}

/// Reads a container file, checking the magic.
pub fn read_container(path: &Path, magic: &[u8; 8]) -> Result<(Value, BTreeMap<String, Vec<f64>>)> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut got_magic = [0u8; 8];
    file.read_exact(&mut got_magic)?;
    if &got_magic != magic {
        return Err(Error::Format(format!(
            "bad magic {:?} in {}, expected {:?}",
            String::from_utf8_lossy(&got_magic),
            path.display(),
            String::from_utf8_lossy(magic)
        )));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes)?;
    let header: Value = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Format(format!("header parse: {e}")))?;
    let mut sections = BTreeMap::new();
    let list = header
        .get("sections")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Format("header lacks a sections list".into()))?;
    for entry in list {
        let name = entry
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Format("section without name".into()))?;
        let len = entry
            .get("len")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Format("section without length".into()))? as usize;
        let mut data = vec![0.0f64; len];
        let mut buf = [0u8; 8];
        for v in data.iter_mut() {
            file.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        sections.insert(name.to_string(), data);
    }
    Ok((header, sections))
}

/// Writes a dataset. `extra` is merged into the header (resolved run
/// configuration, library version, ...).
pub fn write_dataset(path: &Path, ds: &Dataset, extra: Value) -> Result<()> {
    let m = ds.m;
    let record_len = 2 + m * m;
    let mut records = Vec::with_capacity(ds.len() * record_len);
    for i in 0..ds.len() {
        records.push(ds.points[i].alpha());
        records.push(ds.points[i].beta());
        // row-major matrix entries
        for r in 0..m {
            for c in 0..m {
                records.push(ds.y[i][(r, c)]);
            }
        }
    }
    let header = json!({
        "kind": "dataset",
        "m": m,
        "n": ds.len(),
        "seed": ds.seed,
        "noise_scale": ds.noise_scale,
        "truth": ds.truth_meta,
        "extra": extra,
    });
    write_container(path, DATASET_MAGIC, header, &[("records", &records)])
}

/// Reads a dataset back; returns the dataset and the full header.
pub fn read_dataset(path: &Path) -> Result<(Dataset, Value)> {
    let (header, mut sections) = read_container(path, DATASET_MAGIC)?;
    let m = header
        .get("m")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Format("dataset header lacks m".into()))? as usize;
    let n = header
        .get("n")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Format("dataset header lacks n".into()))? as usize;
    let records = sections
        .remove("records")
        .ok_or_else(|| Error::Format("dataset lacks records section".into()))?;
    let record_len = 2 + m * m;
    if records.len() != n * record_len {
        return Err(Error::Format(format!(
            "dataset payload has {} floats, expected {}",
            records.len(),
            n * record_len
        )));
    }
    let mut points = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let base = i * record_len;
        points.push(BoundaryPoint::new(records[base], records[base + 1])?);
        let mat = DMatrix::from_row_slice(m, m, &records[base + 2..base + record_len]);
        if !mat.iter().all(|v| v.is_finite()) {
            return Err(Error::Format(format!("record {i} has non-finite entries")));
        }
        y.push(mat);
    }
    let ds = Dataset {
        m,
        points,
        y,
        seed: header.get("seed").and_then(Value::as_u64).unwrap_or(0),
        noise_scale: header
            .get("noise_scale")
            .and_then(Value::as_f64)
            .unwrap_or(f64::NAN),
        truth_meta: header
            .get("truth")
            .and_then(Value::as_str)
            .unwrap_or("")
            .to_string(),
    };
    Ok((ds, header))
}

fn flatten(samples: &[DVector<f64>]) -> Vec<f64> {
    samples.iter().flat_map(|s| s.iter().copied()).collect()
}

fn unflatten(data: &[f64], dim: usize) -> Result<Vec<DVector<f64>>> {
    if dim == 0 || data.len() % dim != 0 {
        return Err(Error::Format("sample payload not a multiple of dim".into()));
    }
    Ok(data
        .chunks_exact(dim)
        .map(DVector::from_row_slice)
        .collect())
}

fn config_from_header(header: &Value) -> Result<SamplerConfig> {
    serde_json::from_value(
        header
            .get("sampler")
            .cloned()
            .ok_or_else(|| Error::Format("header lacks sampler config".into()))?,
    )
    .map_err(|e| Error::Format(format!("sampler config parse: {e}")))
}

/// Writes a finished chain.
pub fn write_chain(path: &Path, out: &ChainOutput, extra: Value) -> Result<()> {
    let dim = out.final_state.theta.len();
    let header = json!({
        "kind": "chain",
        "dim": dim,
        "retained": out.samples.len(),
        "k_final": out.final_state.k,
        "sampler": serde_json::to_value(&out.config)
            .map_err(|e| Error::Format(e.to_string()))?,
        "extra": extra,
    });
    let samples = flatten(&out.samples);
    let theta: Vec<f64> = out.final_state.theta.iter().copied().collect();
    write_container(
        path,
        CHAIN_MAGIC,
        header,
        &[
            ("samples", &samples),
            ("grad_norm_trace", &out.grad_norm_trace),
            ("final_theta", &theta),
        ],
    )
}

pub fn read_chain(path: &Path) -> Result<(ChainOutput, Value)> {
    let (header, mut sections) = read_container(path, CHAIN_MAGIC)?;
    let dim = header
        .get("dim")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Format("chain header lacks dim".into()))? as usize;
    let config = config_from_header(&header)?;
    let samples = unflatten(
        &sections
            .remove("samples")
            .ok_or_else(|| Error::Format("chain lacks samples".into()))?,
        dim,
    )?;
    let trace = sections
        .remove("grad_norm_trace")
        .ok_or_else(|| Error::Format("chain lacks gradient trace".into()))?;
    let theta = sections
        .remove("final_theta")
        .ok_or_else(|| Error::Format("chain lacks final state".into()))?;
    let k_final = header.get("k_final").and_then(Value::as_u64).unwrap_or(0);
    Ok((
        ChainOutput {
            samples,
            grad_norm_trace: trace,
            final_state: ChainState {
                theta: DVector::from_row_slice(&theta),
                k: k_final,
            },
            config,
        },
        header,
    ))
}

/// Writes a resumable checkpoint (full counter-RNG state is implied by the
/// seed and step index in the sampler config/header).
pub fn write_checkpoint(
    path: &Path,
    ck: &Checkpoint,
    cfg: &SamplerConfig,
    extra: Value,
) -> Result<()> {
    let dim = ck.state.theta.len();
    let header = json!({
        "kind": "checkpoint",
        "dim": dim,
        "k": ck.state.k,
        "retained": ck.samples.len(),
        "sampler": serde_json::to_value(cfg).map_err(|e| Error::Format(e.to_string()))?,
        "extra": extra,
    });
    let theta: Vec<f64> = ck.state.theta.iter().copied().collect();
    let samples = flatten(&ck.samples);
    write_container(
        path,
        CHECKPOINT_MAGIC,
        header,
        &[
            ("theta", &theta),
            ("samples", &samples),
            ("grad_norm_trace", &ck.grad_norm_trace),
        ],
    )
}

pub fn read_checkpoint(path: &Path) -> Result<(Checkpoint, SamplerConfig, Value)> {
    let (header, mut sections) = read_container(path, CHECKPOINT_MAGIC)?;
    let dim = header
        .get("dim")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Format("checkpoint header lacks dim".into()))? as usize;
    let k = header
        .get("k")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Format("checkpoint header lacks k".into()))?;
    let cfg = config_from_header(&header)?;
    let theta = sections
        .remove("theta")
        .ok_or_else(|| Error::Format("checkpoint lacks theta".into()))?;
    if theta.len() != dim {
        return Err(Error::Format("checkpoint theta has wrong length".into()));
    }
    let samples = unflatten(
        sections.get("samples").map(Vec::as_slice).unwrap_or(&[]),
        dim,
    )?;
    let trace = sections.remove("grad_norm_trace").unwrap_or_default();
    Ok((
        Checkpoint {
            state: ChainState {
                theta: DVector::from_row_slice(&theta),
                k,
            },
            samples,
            grad_norm_trace: trace,
        },
        cfg,
        header,
    ))
}

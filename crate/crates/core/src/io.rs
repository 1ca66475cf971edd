//! On-disk containers for checkpoints and datasets.
//!
//! Both are safetensors files. Arrays are little-endian `f64` (booleans as
//! `u8`, counts and labels as `i64`); a single metadata entry holds a JSON
//! document describing the contents, so files are byte-for-byte
//! reproducible.

use std::collections::HashMap;
use std::path::Path;

use safetensors::tensor::{Dtype, TensorView};
use safetensors::SafeTensors;
use serde::{Deserialize, Serialize};

use crate::data::{Manifest, SequenceSample};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ModelParams};
use crate::numeric::Matrix;
use crate::params::ParamSet;

const META_KEY: &str = "stlstm";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Header {
    Checkpoint {
        version: u32,
        config: ModelConfig,
        info: CheckpointInfo,
    },
    Dataset {
        version: u32,
        split: String,
        manifest: Manifest,
    },
}

/// Training state recorded alongside the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointInfo {
    /// Epoch after which the weights were saved (0 for untrained).
    pub epoch: usize,
    pub val_macro_f1: Option<f64>,
}

struct Owned {
    name: String,
    dtype: Dtype,
    shape: Vec<usize>,
    data: Vec<u8>,
}

fn f64_bytes(v: impl IntoIterator<Item = f64>) -> Vec<u8> {
    v.into_iter().flat_map(f64::to_le_bytes).collect()
}

fn i64_bytes(v: impl IntoIterator<Item = i64>) -> Vec<u8> {
    v.into_iter().flat_map(i64::to_le_bytes).collect()
}

fn serialize(header: &Header, tensors: &[Owned]) -> Result<Vec<u8>> {
    let json = serde_json::to_string(header).map_err(|e| Error::Format(e.to_string()))?;
    let meta = HashMap::from([(META_KEY.to_string(), json)]);
    let views = tensors
        .iter()
        .map(|t| {
            TensorView::new(t.dtype, t.shape.clone(), &t.data)
                .map(|v| (t.name.clone(), v))
                .map_err(|e| Error::Format(format!("tensor {}: {e}", t.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    safetensors::serialize(views, Some(meta)).map_err(|e| Error::Format(e.to_string()))
}

fn parse(bytes: &[u8]) -> Result<(Header, SafeTensors<'_>)> {
    let (_, meta) = SafeTensors::read_metadata(bytes).map_err(|e| Error::Format(e.to_string()))?;
    let json = meta
        .metadata()
        .as_ref()
        .and_then(|m| m.get(META_KEY))
        .ok_or_else(|| Error::Format("missing container header".into()))?;
    let header: Header = serde_json::from_str(json).map_err(|e| Error::Format(e.to_string()))?;
    let st = SafeTensors::deserialize(bytes).map_err(|e| Error::Format(e.to_string()))?;
    Ok((header, st))
}

fn read_f64(st: &SafeTensors<'_>, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
    let t = st
        .tensor(name)
        .map_err(|_| Error::Format(format!("missing tensor {name}")))?;
    if t.dtype() != Dtype::F64 || t.shape() != shape {
        return Err(Error::Format(format!(
            "tensor {name}: expected f64 {shape:?}, found {:?} {:?}",
            t.dtype(),
            t.shape()
        )));
    }
    Ok(t.data()
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn read_typed(st: &SafeTensors<'_>, name: &str, dtype: Dtype, shape: &[usize]) -> Result<Vec<u8>> {
    let t = st
        .tensor(name)
        .map_err(|_| Error::Format(format!("missing tensor {name}")))?;
    if t.dtype() != dtype || t.shape() != shape {
        return Err(Error::Format(format!(
            "tensor {name}: expected {dtype:?} {shape:?}, found {:?} {:?}",
            t.dtype(),
            t.shape()
        )));
    }
    Ok(t.data().to_vec())
}

fn read_i64(st: &SafeTensors<'_>, name: &str, shape: &[usize]) -> Result<Vec<i64>> {
    Ok(read_typed(st, name, Dtype::I64, shape)?
        .chunks_exact(8)
        .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn checkpoint_bytes(model: &Model, info: &CheckpointInfo) -> Result<Vec<u8>> {
    let tensors: Vec<Owned> = model
        .params()
        .tensors()
        .into_iter()
        .map(|(name, m)| Owned {
            name,
            dtype: Dtype::F64,
            shape: vec![m.rows(), m.cols()],
            data: f64_bytes(m.as_slice().iter().copied()),
        })
        .collect();
    let header = Header::Checkpoint {
        version: FORMAT_VERSION,
        config: model.config().clone(),
        info: info.clone(),
    };
    serialize(&header, &tensors)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(Model, CheckpointInfo)> {
    let (header, st) = parse(bytes)?;
    let Header::Checkpoint { config, info, .. } = header else {
        return Err(Error::Format("container is not a checkpoint".into()));
    };
    config.validate()?;
    let mut params = ModelParams::init(&config)?;
    let expected = params.tensors().len();
    if st.len() != expected {
        return Err(Error::Format(format!(
            "checkpoint holds {} tensors, the config needs {expected}",
            st.len()
        )));
    }
    for (name, m) in params.tensors_mut() {
        let shape = [m.rows(), m.cols()];
        let data = read_f64(&st, &name, &shape)?;
        *m = Matrix::from_vec(shape[0], shape[1], data)?;
    }
    Ok((Model::from_parts(config, params)?, info))
}

pub fn write_checkpoint(path: impl AsRef<Path>, model: &Model, info: &CheckpointInfo) -> Result<()> {
    write_file(path.as_ref(), &checkpoint_bytes(model, info)?)
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(Model, CheckpointInfo)> {
    checkpoint_from_bytes(&read_file(path.as_ref())?)
}

/// Encode one split. Per-step blocks of all samples are stacked along the
/// first axis; `lengths` recovers the boundaries.
pub fn dataset_bytes(split: &str, samples: &[SequenceSample], manifest: &Manifest) -> Result<Vec<u8>> {
    let d = manifest.dims;
    for (i, s) in samples.iter().enumerate() {
        s.validate()?;
        if s.d_dense() != d.d_dense
            || s.d_delta() != d.d_delta
            || s.n_sparse() != d.n_sparse
            || s.static_dense.len() != d.d_static_dense
            || s.static_delta.len() != d.d_static_delta
        {
            return Err(Error::invalid(format!("sample {i} does not match the manifest dims")));
        }
    }
    let steps: usize = samples.iter().map(SequenceSample::len).sum();
    let n = samples.len();
    let steps_f64 = |f: &dyn Fn(&SequenceSample) -> &Vec<Vec<f64>>| {
        f64_bytes(samples.iter().flat_map(|s| f(s).iter().flatten().copied()))
    };
    let tensors = vec![
        Owned {
            name: "lengths".into(),
            dtype: Dtype::I64,
            shape: vec![n],
            data: i64_bytes(samples.iter().map(|s| s.len() as i64)),
        },
        Owned {
            name: "dense".into(),
            dtype: Dtype::F64,
            shape: vec![steps, d.d_dense],
            data: steps_f64(&|s| &s.dense),
        },
        Owned {
            name: "delta".into(),
            dtype: Dtype::F64,
            shape: vec![steps, d.d_delta],
            data: steps_f64(&|s| &s.delta),
        },
        Owned {
            name: "mask".into(),
            dtype: Dtype::U8,
            shape: vec![steps, d.n_sparse],
            data: samples
                .iter()
                .flat_map(|s| s.mask.iter().flatten().map(|&b| b as u8))
                .collect(),
        },
        Owned {
            name: "value".into(),
            dtype: Dtype::F64,
            shape: vec![steps, d.n_sparse],
            data: steps_f64(&|s| &s.value),
        },
        Owned {
            name: "static_dense".into(),
            dtype: Dtype::F64,
            shape: vec![n, d.d_static_dense],
            data: f64_bytes(samples.iter().flat_map(|s| s.static_dense.iter().copied())),
        },
        Owned {
            name: "static_delta".into(),
            dtype: Dtype::F64,
            shape: vec![n, d.d_static_delta],
            data: f64_bytes(samples.iter().flat_map(|s| s.static_delta.iter().copied())),
        },
        Owned {
            name: "label".into(),
            dtype: Dtype::I64,
            shape: vec![n],
            data: i64_bytes(samples.iter().map(|s| s.label as i64)),
        },
        Owned {
            name: "origin".into(),
            dtype: Dtype::I64,
            shape: vec![n],
            data: i64_bytes(samples.iter().map(|s| s.origin as i64)),
        },
    ];
    let header = Header::Dataset {
        version: FORMAT_VERSION,
        split: split.to_string(),
        manifest: manifest.clone(),
    };
    serialize(&header, &tensors)
}

/// A decoded split container.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitFile {
    pub split: String,
    pub samples: Vec<SequenceSample>,
    pub manifest: Manifest,
}

fn rows(flat: &[f64], width: usize, from: usize, len: usize) -> Vec<Vec<f64>> {
    (from..from + len)
        .map(|r| flat[r * width..(r + 1) * width].to_vec())
        .collect()
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<SplitFile> {
    let (header, st) = parse(bytes)?;
    let Header::Dataset { split, manifest, .. } = header else {
        return Err(Error::Format("container is not a dataset".into()));
    };
    let d = manifest.dims;
    let n = st
        .tensor("lengths")
        .map_err(|_| Error::Format("missing tensor lengths".into()))?
        .shape()
        .first()
        .copied()
        .unwrap_or(0);
    let lengths = read_i64(&st, "lengths", &[n])?;
    if lengths.iter().any(|&l| l <= 0) {
        return Err(Error::Format("non-positive sequence length".into()));
    }
    let steps = lengths.iter().sum::<i64>() as usize;
    let dense = read_f64(&st, "dense", &[steps, d.d_dense])?;
    let delta = read_f64(&st, "delta", &[steps, d.d_delta])?;
    let mask = read_typed(&st, "mask", Dtype::U8, &[steps, d.n_sparse])?;
    let value = read_f64(&st, "value", &[steps, d.n_sparse])?;
    let static_dense = read_f64(&st, "static_dense", &[n, d.d_static_dense])?;
    let static_delta = read_f64(&st, "static_delta", &[n, d.d_static_delta])?;
    let label = read_i64(&st, "label", &[n])?;
    let origin = read_i64(&st, "origin", &[n])?;

    let mut samples = Vec::with_capacity(n);
    let mut at = 0usize;
    for i in 0..n {
        let len = lengths[i] as usize;
        if label[i] < 0 || label[i] as usize >= d.num_classes {
            return Err(Error::Format(format!("label {} out of range", label[i])));
        }
        let m = d.n_sparse;
        let sample = SequenceSample {
            dense: rows(&dense, d.d_dense, at, len),
            delta: rows(&delta, d.d_delta, at, len),
            mask: (at..at + len)
                .map(|r| mask[r * m..(r + 1) * m].iter().map(|&b| b != 0).collect())
                .collect(),
            value: rows(&value, m, at, len),
            static_dense: static_dense[i * d.d_static_dense..(i + 1) * d.d_static_dense].to_vec(),
            static_delta: static_delta[i * d.d_static_delta..(i + 1) * d.d_static_delta].to_vec(),
            label: label[i] as usize,
            origin: origin[i] as u64,
        };
        sample.validate().map_err(|e| Error::Format(format!("sample {i}: {e}")))?;
        samples.push(sample);
        at += len;
    }
    Ok(SplitFile {
        split,
        samples,
        manifest,
    })
}

pub fn write_dataset(
    path: impl AsRef<Path>,
    split: &str,
    samples: &[SequenceSample],
    manifest: &Manifest,
) -> Result<()> {
    write_file(path.as_ref(), &dataset_bytes(split, samples, manifest)?)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<SplitFile> {
    dataset_from_bytes(&read_file(path.as_ref())?)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_file(path.as_ref(), to_json(value)?.as_bytes())
}

//! Flat binary tensor checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes   b"LXCK"
//! version    u32       CHECKPOINT_VERSION
//! header_len u64       byte length of the JSON header
//! header     JSON      {"kind", "metadata", "tensors": [{"name", "shape"}]}
//! payload    f64 LE    every tensor's values, row-major, in header order
//! ```

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use crate::error::NnError;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LXCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl TensorRecord {
    pub fn from_array(name: impl Into<String>, a: &Array2<f64>) -> Self {
        let (r, c) = a.dim();
        Self { name: name.into(), shape: vec![r, c], values: a.iter().copied().collect() }
    }

    pub fn to_array(&self) -> Result<Array2<f64>, NnError> {
        match self.shape.as_slice() {
            &[r, c] => Array2::from_shape_vec((r, c), self.values.clone())
                .map_err(|e| NnError::Checkpoint(format!("{}: {e}", self.name))),
            other => Err(NnError::Checkpoint(format!("{}: expected 2-d shape, got {other:?}", self.name))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    metadata: serde_json::Value,
    tensors: Vec<TensorMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub metadata: serde_json::Value,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Result<&TensorRecord, NnError> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| NnError::Checkpoint(format!("missing tensor {name:?}")))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), NnError> {
        let io = |e: std::io::Error| NnError::Checkpoint(e.to_string());
        let header = Header {
            kind: self.kind.clone(),
            metadata: self.metadata.clone(),
            tensors: self.tensors.iter().map(|t| TensorMeta { name: t.name.clone(), shape: t.shape.clone() }).collect(),
        };
        let header = serde_json::to_vec(&header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(header.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&header).map_err(io)?;
        let mut buf = Vec::new();
        for t in &self.tensors {
            buf.clear();
            buf.reserve(t.values.len() * 8);
            for v in &t.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, NnError> {
        let io = |e: std::io::Error| NnError::Checkpoint(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(io)?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {version}")));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(io)?;
        let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut header).map_err(io)?;
        let header: Header = serde_json::from_slice(&header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for meta in header.tensors {
            let n: usize = meta.shape.iter().product();
            let mut raw = vec![0u8; n * 8];
            r.read_exact(&mut raw).map_err(io)?;
            let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            tensors.push(TensorRecord { name: meta.name, shape: meta.shape, values });
        }
        Ok(Self { kind: header.kind, metadata: header.metadata, tensors })
    }
}

/// Optimizer state as tensor records plus a JSON summary of its scalars.
pub fn adam_to_records(prefix: &str, adam: &AdamState) -> (serde_json::Value, Vec<TensorRecord>) {
    let meta = serde_json::json!({ "config": adam.config, "step": adam.step, "tensors": adam.first_moment.len() });
    let mut out = Vec::new();
    for (i, (m, v)) in adam.first_moment.iter().zip(&adam.second_moment).enumerate() {
        out.push(TensorRecord::from_array(format!("{prefix}.m.{i}"), m));
        out.push(TensorRecord::from_array(format!("{prefix}.v.{i}"), v));
    }
    (meta, out)
}

pub fn adam_from_records(prefix: &str, meta: &serde_json::Value, ckpt: &Checkpoint) -> Result<AdamState, NnError> {
    let bad = |what: &str| NnError::Checkpoint(format!("optimizer metadata: {what}"));
    let config: AdamConfig = serde_json::from_value(meta.get("config").cloned().ok_or_else(|| bad("config"))?)
        .map_err(|e| bad(&e.to_string()))?;
    let step = meta.get("step").and_then(|v| v.as_u64()).ok_or_else(|| bad("step"))?;
    let n = meta.get("tensors").and_then(|v| v.as_u64()).ok_or_else(|| bad("tensors"))? as usize;
    let mut adam = AdamState::new(config);
    adam.step = step;
    for i in 0..n {
        adam.first_moment.push(ckpt.tensor(&format!("{prefix}.m.{i}"))?.to_array()?);
        adam.second_moment.push(ckpt.tensor(&format!("{prefix}.v.{i}"))?.to_array()?);
    }
    Ok(adam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn binary_round_trip_is_exact() {
        let ckpt = Checkpoint {
            kind: "test".into(),
            metadata: serde_json::json!({"vocabulary": ["red", "blue"]}),
            tensors: vec![
                TensorRecord::from_array("a", &array![[1.0, -0.1], [f64::MIN_POSITIVE, 3e300]]),
                TensorRecord::from_array("b", &array![[0.1 + 0.2]]),
            ],
        };
        let mut buf = Vec::new();
        ckpt.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], CHECKPOINT_MAGIC);
        let back = Checkpoint::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, ckpt);
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(Checkpoint::read_from(&b"NOPE\x01\0\0\0"[..]).is_err());
    }
}

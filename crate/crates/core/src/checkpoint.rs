//! Binary checkpoints: one JSON header line, then `param_count` f32 values
//! in little-endian order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{build_model, ModelSpec};
use crate::params::{FlatParams, ParamGroup};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u64,
    pub model_spec: ModelSpec,
    pub param_group_table: Vec<ParamGroup>,
    pub dtype: String,
    pub byte_order: String,
    pub param_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: FlatParams,
}

fn field(name: &str, message: impl Into<String>) -> Error {
    Error::Checkpoint { field: name.into(), message: message.into() }
}

/// Values are stored as f32; parameters built or trained here are already f32-exact.
pub fn encode_checkpoint(spec: &ModelSpec, params: &FlatParams) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        model_spec: spec.clone(),
        param_group_table: params.groups().to_vec(),
        dtype: "f32".into(),
        byte_order: "little-endian".into(),
        param_count: params.len(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(4 * params.len());
    for &v in params.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn save_checkpoint(path: &Path, spec: &ModelSpec, params: &FlatParams) -> Result<()> {
    fs::write(path, encode_checkpoint(spec, params)?).map_err(|e| Error::io(path, e))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let newline = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| field("header", "no header line"))?;
    let raw: Value = serde_json::from_slice(&bytes[..newline]).map_err(|e| field("header", e.to_string()))?;
    let obj = raw.as_object().ok_or_else(|| field("header", "header is not a JSON object"))?;
    for name in ["format_version", "model_spec", "param_group_table", "dtype", "byte_order", "param_count"] {
        if !obj.contains_key(name) {
            return Err(field(name, "missing"));
        }
    }
    let version = obj["format_version"].as_u64().ok_or_else(|| field("format_version", "not an unsigned integer"))?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let header: CheckpointHeader = serde_json::from_value(raw).map_err(|e| field("header", e.to_string()))?;
    if header.dtype != "f32" {
        return Err(field("dtype", format!("expected \"f32\", found {:?}", header.dtype)));
    }
    if header.byte_order != "little-endian" {
        return Err(field("byte_order", format!("expected \"little-endian\", found {:?}", header.byte_order)));
    }
    let (_, reference) = build_model(&header.model_spec).map_err(|e| field("model_spec", e.to_string()))?;
    if header.param_count != reference.len() {
        return Err(field(
            "param_count",
            format!("model_spec implies {} parameters, header says {}", reference.len(), header.param_count),
        ));
    }
    if header.param_group_table != reference.groups() {
        return Err(field("param_group_table", "does not match the layout implied by model_spec"));
    }
    let payload = &bytes[newline + 1..];
    let expected = 4 * header.param_count;
    if payload.len() < expected {
        return Err(field(
            "payload",
            format!("truncated payload: expected {expected} bytes, found {}", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(field("payload", format!("expected {expected} bytes, found {} trailing", payload.len() - expected)));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    let params = FlatParams::new(values, header.param_group_table.clone()).map_err(|e| field("payload", e.to_string()))?;
    Ok(Checkpoint { header, params })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

//! Flat parameter vectors with named groups.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    Embedding,
    FullyConnected,
    Convolution,
    NormalizationScale,
    NormalizationBias,
    Bias,
    Other,
}

impl GroupKind {
    pub fn label(self) -> &'static str {
        match self {
            GroupKind::Embedding => "embedding",
            GroupKind::FullyConnected => "fully-connected",
            GroupKind::Convolution => "convolution",
            GroupKind::NormalizationScale => "normalization-scale",
            GroupKind::NormalizationBias => "normalization-bias",
            GroupKind::Bias => "bias",
            GroupKind::Other => "other",
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub kind: GroupKind,
    pub layer: usize,
}

impl ParamGroup {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// The trainable parameters of one model, laid out contiguously.
///
/// Groups partition `[0, len)` in order with no gaps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatParams {
    values: Vec<f64>,
    groups: Vec<ParamGroup>,
}

impl FlatParams {
    pub fn new(values: Vec<f64>, groups: Vec<ParamGroup>) -> Result<Self> {
        let mut next = 0;
        for g in &groups {
            if g.offset != next || g.len == 0 {
                return Err(Error::validation(format!(
                    "group `{}` at offset {} (len {}) breaks the partition at {next}",
                    g.name, g.offset, g.len
                )));
            }
            next += g.len;
        }
        if next != values.len() {
            return Err(Error::validation(format!(
                "groups cover {next} values but the vector has {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite parameter at index {i}")));
        }
        Ok(FlatParams { values, groups })
    }

    /// A single `other` group covering everything.
    pub fn ungrouped(values: Vec<f64>) -> Result<Self> {
        let group = ParamGroup {
            name: "params".into(),
            offset: 0,
            len: values.len(),
            kind: GroupKind::Other,
            layer: 0,
        };
        Self::new(values, vec![group])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same groups, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::incompatible(format!(
                "expected {} values, got {}",
                self.values.len(),
                values.len()
            )));
        }
        Ok(FlatParams { values, groups: self.groups.clone() })
    }

    /// Rounds every value to the nearest `f32`, the storage precision.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.values {
            *v = *v as f32 as f64;
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Targets {
    Classes(Vec<usize>),
    /// Regression targets shaped `[N, D]`.
    Values(Tensor),
}

/// Inputs shaped `[N, D]` or `[N, C, H, W]` with one target per row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub inputs: Tensor,
    pub targets: Targets,
}

impl Batch {
    pub fn new(inputs: Tensor, targets: Targets) -> Result<Self> {
        let n = inputs.rows();
        let m = match &targets {
            Targets::Classes(c) => c.len(),
            Targets::Values(t) => t.rows(),
        };
        if n != m {
            return Err(Error::incompatible(format!("{n} input rows but {m} targets")));
        }
        Ok(Batch { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn classes(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Classes(c) => Some(c),
            Targets::Values(_) => None,
        }
    }

    pub fn select(&self, indices: &[usize]) -> Batch {
        let targets = match &self.targets {
            Targets::Classes(c) => Targets::Classes(indices.iter().map(|&i| c[i]).collect()),
            Targets::Values(t) => Targets::Values(t.select_rows(indices)),
        };
        Batch { inputs: self.inputs.select_rows(indices), targets }
    }
}

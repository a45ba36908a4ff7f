//! Corruption constraints and their closed-form maximizers.
//!
//! A constraint allows perturbations `a` with `||a||_p = epsilon` and at
//! most `n` nonzeros, all inside a subspace mask. The maximizer of `a . v`
//! over that set keeps the `n` largest `|v_i|` (the vector `h`) and puts
//! `a_i ∝ sgn(h_i) |h_i|^(1/(p-1))`, reaching `epsilon * ||h||_q` with
//! `q = p / (p - 1)`.

mod feasible;
mod select;
mod solve;

pub use feasible::sample_feasible;
pub(crate) use solve::perturb;
pub use select::{select_top_n, top_n, SelectStats};
pub use solve::{
    apply_corruption, gradient_corruption, random_corruption, solve_constrained_max, solve_sparse,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{lp_norm, NormOrder};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConstraint {
    pub p: NormOrder,
    pub epsilon: f64,
    pub n: usize,
    /// Sorted, distinct indices of the corruptible parameters.
    pub mask: Vec<usize>,
}

impl CorruptionConstraint {
    pub fn new(p: NormOrder, epsilon: f64, n: usize, mask: Vec<usize>) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::validation(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        if mask.is_empty() {
            return Err(Error::validation("subspace mask is empty"));
        }
        if mask.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("subspace mask must be sorted and distinct"));
        }
        if n == 0 || n > mask.len() {
            return Err(Error::validation(format!(
                "n = {n} outside [1, {}] for this subspace",
                mask.len()
            )));
        }
        Ok(CorruptionConstraint { p, epsilon, n, mask })
    }

    /// Every one of `k` parameters is corruptible.
    pub fn full(p: NormOrder, epsilon: f64, n: usize, k: usize) -> Result<Self> {
        Self::new(p, epsilon, n, (0..k).collect())
    }

    pub fn subspace_len(&self) -> usize {
        self.mask.len()
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.p, epsilon, self.n, self.mask.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Random,
    Gradient,
    Oracle,
}

/// A sparse perturbation of a parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionVector {
    /// Sorted, distinct parameter indices.
    pub indices: Vec<usize>,
    /// Nonzero perturbations, parallel to `indices`.
    pub values: Vec<f64>,
    pub provenance: Provenance,
    /// `a . v` for the direction `v` the corruption maximized.
    pub linear_value: f64,
}

impl CorruptionVector {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self, p: NormOrder) -> f64 {
        lp_norm(&self.values, p)
    }

    pub fn to_dense(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; k];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    /// `a . v` against a dense vector.
    pub fn dot_dense(&self, v: &[f64]) -> f64 {
        self.indices.iter().zip(&self.values).fold(0.0, |acc, (&i, &a)| acc + a * v[i])
    }

    pub fn negated(&self) -> Self {
        CorruptionVector {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| -v).collect(),
            provenance: self.provenance,
            linear_value: -self.linear_value,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CorruptionVector {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            provenance: self.provenance,
            linear_value: self.linear_value * factor,
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::NormOrder;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundInput {
    pub p: NormOrder,
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    /// Smoothness constant of the loss around `w`.
    pub smoothness_l: f64,
    /// `||g||_2` at `w`.
    pub grad_norm_g: f64,
}

impl ErrorBoundInput {
    pub fn new(p: f64, n: usize, k: usize, epsilon: f64, smoothness_l: f64, grad_norm_g: f64) -> Result<Self> {
        let inp = ErrorBoundInput { p: NormOrder::new(p)?, n, k, epsilon, smoothness_l, grad_norm_g };
        inp.validate()?;
        Ok(inp)
    }

    fn validate(&self) -> Result<()> {
        if self.p.as_f64().is_nan() || self.p.as_f64() < 1.0 {
            return Err(Error::Domain(format!("norm order must satisfy p >= 1, got {}", self.p)));
        }
        if self.n == 0 || self.n > self.k {
            return Err(Error::validation(format!("need 1 <= n <= k, got n = {}, k = {}", self.n, self.k)));
        }
        for (name, v) in [("epsilon", self.epsilon), ("smoothness_l", self.smoothness_l), ("grad_norm_g", self.grad_norm_g)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Upper bound on `max / gradient-based - 1`.
    pub bound: f64,
    /// Exponent of `n` in the bound.
    pub g_exponent: f64,
    pub beta_p: f64,
    pub beta_q: f64,
}

/// `max{1, n^(1/2 - 1/r)}`: the worst ratio `||x||_2 / ||x||_r` over `n`-sparse `x`.
pub fn beta(r: NormOrder, n: usize) -> f64 {
    let inv = match r {
        NormOrder::Infinity => 0.0,
        NormOrder::Finite(r) => 1.0 / r,
    };
    (n as f64).powf(0.5 - inv).max(1.0)
}

/// `max{(p - 4) / (2p), (1 - p) / p}`.
pub fn g_exponent(p: NormOrder) -> f64 {
    match p {
        NormOrder::Infinity => 0.5,
        NormOrder::Finite(p) => ((p - 4.0) / (2.0 * p)).max((1.0 - p) / p),
    }
}

/// `L * beta_p^2 * beta_q * sqrt(k) * epsilon / (2 G sqrt(n))`.
pub fn theorem2_bound(inp: &ErrorBoundInput) -> Result<BoundReport> {
    inp.validate()?;
    let beta_p = beta(inp.p, inp.n);
    let beta_q = beta(inp.p.dual(), inp.n);
    let bound = inp.smoothness_l * beta_p * beta_p * beta_q * (inp.k as f64).sqrt() * inp.epsilon
        / (2.0 * inp.grad_norm_g * (inp.n as f64).sqrt());
    Ok(BoundReport { bound, g_exponent: g_exponent(inp.p), beta_p, beta_q })
}

//! Matrix-free curvature probes built on central differences of gradients.

use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::engine::{eval_grad, Model};
use crate::error::{Error, Result};
use crate::norms::{dot, l2_norm};
use crate::params::FlatParams;
use crate::rng::RngState;

/// `(g(w + delta v) - g(w - delta v)) / (2 delta)`.
pub fn hessian_vector_product(model: &dyn Model, params: &[f64], data: &Batch, v: &[f64], delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::validation(format!("delta must be positive, got {delta}")));
    }
    if v.len() != params.len() {
        return Err(Error::incompatible(format!("direction has {} entries, parameters {}", v.len(), params.len())));
    }
    let shifted = |sign: f64| -> Vec<f64> { params.iter().zip(v).map(|(w, d)| w + sign * delta * d).collect() };
    let plus = eval_grad(model, &shifted(1.0), data)?.grad;
    let minus = eval_grad(model, &shifted(-1.0), data)?.grad;
    let hv: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * delta)).collect();
    if hv.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericOverflow("Hessian-vector product is not finite".into()));
    }
    Ok(hv)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub trace: f64,
    pub std_error: f64,
    pub probes: usize,
    pub delta: f64,
}

/// Hutchinson estimate of `tr(H)` with Rademacher probes and the default
/// step `delta = 1e-3 (1 + ||w||_2)`.
pub fn hutchinson_trace(
    model: &dyn Model,
    params: &FlatParams,
    data: &Batch,
    probes: usize,
    rng: &mut RngState,
) -> Result<TraceEstimate> {
    let delta = 1e-3 * (1.0 + l2_norm(params.values()));
    hutchinson_trace_with_delta(model, params, data, probes, rng, delta)
}

pub fn hutchinson_trace_with_delta(
    model: &dyn Model,
    params: &FlatParams,
    data: &Batch,
    probes: usize,
    rng: &mut RngState,
    delta: f64,
) -> Result<TraceEstimate> {
    if probes == 0 {
        return Err(Error::validation("need at least one probe"));
    }
    let k = params.len();
    let mut samples = Vec::with_capacity(probes);
    for _ in 0..probes {
        let v: Vec<f64> = (0..k).map(|_| rng.rademacher()).collect();
        let hv = hessian_vector_product(model, params.values(), data, &v, delta)?;
        samples.push(dot(&v, &hv));
    }
    let m = samples.len() as f64;
    let trace = samples.iter().sum::<f64>() / m;
    let std_error = if samples.len() < 2 {
        0.0
    } else {
        (samples.iter().map(|s| (s - trace) * (s - trace)).sum::<f64>() / (m - 1.0) / m).sqrt()
    };
    Ok(TraceEstimate { trace, std_error, probes, delta })
}

/// Heuristic smoothness constant: power iteration for the largest
/// `|eigenvalue|` of the Hessian at `w`. Local only; not a global bound.
pub fn estimate_smoothness(
    model: &dyn Model,
    params: &FlatParams,
    data: &Batch,
    iterations: usize,
    rng: &mut RngState,
) -> Result<f64> {
    let delta = 1e-3 * (1.0 + l2_norm(params.values()));
    let mut v = rng.gaussian_vec(params.len());
    let mut lambda = 0.0;
    for _ in 0..iterations.max(1) {
        let norm = l2_norm(&v);
        if norm == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let hv = hessian_vector_product(model, params.values(), data, &v, delta)?;
        lambda = l2_norm(&hv);
        v = hv;
    }
    Ok(lambda)
}

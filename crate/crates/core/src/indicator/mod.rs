//! Estimators of the worst-case loss change under corruption, and the
//! theory behind them.
//!
//! Three routes to `max_{a in S} L(w + a) - L(w)`:
//! the gradient-based closed form ([`estimate_indicator_gradient`]),
//! Monte-Carlo random corruption ([`estimate_indicator_montecarlo`]) and a
//! brute-force search over the constraint set ([`brute_force_indicator`]).

mod bound;
mod eta;
mod montecarlo;
mod oracle;
mod trace;

pub use bound::{beta, g_exponent, theorem2_bound, BoundReport, ErrorBoundInput};
pub use eta::{eta_cdf, eta_density, ks_statistic, sample_eta, DensityValue, EtaDistribution};
pub use montecarlo::{
    estimate_indicator_montecarlo, estimate_indicator_montecarlo_with, random_deltas, McOptions, McSummary,
    QuantileAbs, MC_PROBABILITIES,
};
pub use oracle::{brute_force_indicator, OracleMode, OracleResult};
pub use trace::{estimate_smoothness, hessian_vector_product, hutchinson_trace, hutchinson_trace_with_delta, TraceEstimate};

use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::corruption::{gradient_corruption, perturb, CorruptionConstraint, CorruptionVector};
use crate::engine::{eval_grad, eval_loss, Model};
use crate::error::Result;
use crate::params::FlatParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorEstimate {
    /// `L(w + a) - L(w)` for the gradient-based corruption `a`.
    pub delta_loss: f64,
    /// First-order prediction `epsilon * ||h||_q`.
    pub first_order: f64,
    pub ratio: f64,
    pub base_loss: f64,
    pub constraint: CorruptionConstraint,
    pub corruption: CorruptionVector,
}

/// Gradient-based indicator with gradient and loss both taken on `data`.
pub fn estimate_indicator_gradient(
    model: &dyn Model,
    params: &FlatParams,
    data: &Batch,
    c: &CorruptionConstraint,
) -> Result<IndicatorEstimate> {
    estimate_indicator_gradient_split(model, params, data, data, c)
}

/// Gradient from `grad_data`, loss change measured on `loss_data`.
pub fn estimate_indicator_gradient_split(
    model: &dyn Model,
    params: &FlatParams,
    grad_data: &Batch,
    loss_data: &Batch,
    c: &CorruptionConstraint,
) -> Result<IndicatorEstimate> {
    let g = eval_grad(model, params.values(), grad_data)?;
    let a = gradient_corruption(&g.grad, c)?;
    let base_loss = if std::ptr::eq(grad_data, loss_data) { g.loss } else { eval_loss(model, params.values(), loss_data)? };
    let corrupted = perturb(params.values(), &a)?;
    let delta_loss = eval_loss(model, &corrupted, loss_data)? - base_loss;
    Ok(IndicatorEstimate {
        delta_loss,
        first_order: a.linear_value,
        ratio: delta_loss / a.linear_value,
        base_loss,
        constraint: c.clone(),
        corruption: a,
    })
}

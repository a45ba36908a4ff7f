use serde::{Deserialize, Serialize};

use super::{train, AcrtConfig};
use crate::corruption::{gradient_corruption, perturb, CorruptionConstraint};
use crate::data::{Dataset, Split};
use crate::engine::{eval_grad, Model};
use crate::error::{Error, Result};
use crate::model::{default_metric, ModelSpec};
use crate::norms::NormOrder;
use crate::params::FlatParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub epsilon: f64,
    pub metric_baseline: f64,
    pub metric_acrt: f64,
}

/// Eval-split metric after a gradient-based corruption of every parameter
/// (`n = k`) at `epsilon`; the gradient comes from `grad_split`.
pub fn corrupted_metric(
    model: &dyn Model,
    params: &FlatParams,
    data: &Dataset,
    p: NormOrder,
    epsilon: f64,
    grad_split: Split,
) -> Result<f64> {
    if epsilon == 0.0 {
        return Ok(default_metric(model, params.values(), &data.eval)?.value);
    }
    let k = params.len();
    let c = CorruptionConstraint::full(p, epsilon, k, k)?;
    let g = eval_grad(model, params.values(), data.split(grad_split))?;
    match gradient_corruption(&g.grad, &c) {
        Ok(a) => Ok(default_metric(model, &perturb(params.values(), &a)?, &data.eval)?.value),
        Err(Error::DegenerateDirection { .. }) => Ok(default_metric(model, params.values(), &data.eval)?.value),
        Err(e) => Err(e),
    }
}

/// Post-corruption metrics of two parameter sets, each corrupted along its own gradient.
pub fn robustness_table(
    model: &dyn Model,
    baseline: &FlatParams,
    acrt: &FlatParams,
    data: &Dataset,
    eps_list: &[f64],
    p: NormOrder,
    grad_split: Split,
) -> Result<Vec<RobustnessRow>> {
    if eps_list.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::validation("epsilon values must be finite and >= 0"));
    }
    if eps_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("epsilon values must be strictly increasing"));
    }
    for params in [baseline, acrt] {
        if params.len() != model.param_count() {
            return Err(Error::incompatible(format!(
                "model expects {} parameters, got {}",
                model.param_count(),
                params.len()
            )));
        }
    }
    eps_list
        .iter()
        .map(|&epsilon| {
            Ok(RobustnessRow {
                epsilon,
                metric_baseline: corrupted_metric(model, baseline, data, p, epsilon, grad_split)?,
                metric_acrt: corrupted_metric(model, acrt, data, p, epsilon, grad_split)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    /// Uncorrupted eval metric after training at this `epsilon`.
    pub clean_metric: f64,
}

/// Trains `config` once per training `epsilon` and records the clean eval metric.
pub fn epsilon_sweep(spec: &ModelSpec, data: &Dataset, config: &AcrtConfig, eps_list: &[f64]) -> Result<Vec<SweepPoint>> {
    eps_list
        .iter()
        .map(|&epsilon| {
            let mut c = config.clone();
            c.corruption.epsilon = epsilon;
            let run = train(spec, data, &c, None)?;
            let clean_metric = run.log.last().map_or(f64::NAN, |l| l.eval_metric.value);
            Ok(SweepPoint { epsilon, clean_metric })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_dataset, DatasetKind, DatasetSource};
    use crate::model::{build_model, ActivationKind};

    #[test]
    fn zero_row_is_uncorrupted_and_validation() {
        let data = load_dataset(&DatasetSource::synthetic(DatasetKind::TwoMoons, 200, 0)).unwrap();
        let spec = ModelSpec::mlp(vec![2, 8, 2], ActivationKind::Tanh, 0);
        let (model, init) = build_model(&spec).unwrap();
        let trained = train(&spec, &data, &AcrtConfig::baseline(0.1, 5, 32, 0), None).unwrap().params;
        let rows = robustness_table(&model, &init, &trained, &data, &[0.0, 0.5, 2.0], NormOrder::Finite(2.0), Split::Eval)
            .unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].metric_baseline, default_metric(&model, init.values(), &data.eval).unwrap().value);
        assert_eq!(rows[0].metric_acrt, default_metric(&model, trained.values(), &data.eval).unwrap().value);
        assert!(rows[2].metric_acrt <= rows[0].metric_acrt);
        assert!(robustness_table(&model, &init, &trained, &data, &[0.1, 0.1], NormOrder::Finite(2.0), Split::Eval).is_err());
        assert!(robustness_table(&model, &init, &trained, &data, &[-0.1], NormOrder::Finite(2.0), Split::Eval).is_err());
    }
}

//! Per-group vulnerability scans: corrupt one parameter group at a time
//! along its own gradient and record how loss and metric respond.

use serde::{Deserialize, Serialize};

use crate::corruption::{gradient_corruption, perturb, CorruptionConstraint};
use crate::data::{Dataset, Split};
use crate::engine::{eval_grad, eval_loss, Model};
use crate::error::{Error, Result};
use crate::model::{default_metric, param_groups_by, GroupAxis, MetricName};
use crate::norms::NormOrder;
use crate::params::FlatParams;

/// A corruption constraint without `epsilon` or mask; both are set per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintTemplate {
    pub p: NormOrder,
    /// `None` lets every parameter of the group move.
    pub n: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub axis: GroupAxis,
    pub eps_list: Vec<f64>,
    pub template: ConstraintTemplate,
    /// Split supplying the gradient and the loss change; the metric always uses eval.
    #[serde(default)]
    pub grad_split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub group_label: String,
    pub epsilon: f64,
    pub metric_before: f64,
    pub metric_after: f64,
    pub delta_loss: f64,
    pub first_order: f64,
    /// The group's gradient vanished; no corruption was applied.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub axis: GroupAxis,
    pub constraint_template: ConstraintTemplate,
    pub metric: MetricName,
    pub cells: Vec<ScanCell>,
}

pub fn scan(model: &dyn Model, params: &FlatParams, data: &Dataset, cfg: &ScanConfig) -> Result<ScanReport> {
    if cfg.eps_list.is_empty() {
        return Err(Error::validation("scan needs at least one epsilon"));
    }
    if let Some(e) = cfg.eps_list.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::validation(format!("scan epsilons must be positive and finite, got {e}")));
    }
    if cfg.template.n == Some(0) {
        return Err(Error::validation("n must be at least 1"));
    }
    let groups = param_groups_by(params, cfg.axis);
    if groups.is_empty() {
        return Err(Error::validation("parameters have no groups"));
    }
    let loss_data = data.split(cfg.grad_split);
    let g = eval_grad(model, params.values(), loss_data)?;
    let before = default_metric(model, params.values(), &data.eval)?;
    let mut cells = Vec::with_capacity(groups.len() * cfg.eps_list.len());
    for (label, mask) in groups {
        let n = cfg.template.n.unwrap_or(mask.len()).min(mask.len());
        for &epsilon in &cfg.eps_list {
            let c = CorruptionConstraint::new(cfg.template.p, epsilon, n, mask.clone())?;
            let cell = match gradient_corruption(&g.grad, &c) {
                Ok(a) => {
                    assert!(
                        a.indices.iter().all(|i| mask.binary_search(i).is_ok()),
                        "corruption escaped group `{label}`"
                    );
                    let corrupted = perturb(params.values(), &a)?;
                    ScanCell {
                        group_label: label.clone(),
                        epsilon,
                        metric_before: before.value,
                        metric_after: default_metric(model, &corrupted, &data.eval)?.value,
                        delta_loss: eval_loss(model, &corrupted, loss_data)? - g.loss,
                        first_order: a.linear_value,
                        degenerate: false,
                    }
                }
                Err(Error::DegenerateDirection { .. }) => ScanCell {
                    group_label: label.clone(),
                    epsilon,
                    metric_before: before.value,
                    metric_after: before.value,
                    delta_loss: 0.0,
                    first_order: 0.0,
                    degenerate: true,
                },
                Err(e) => return Err(e),
            };
            cells.push(cell);
        }
    }
    Ok(ScanReport { axis: cfg.axis, constraint_template: cfg.template.clone(), metric: before.name, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acrt::{train, AcrtConfig};
    use crate::data::{load_dataset, DatasetKind, DatasetSource};
    use crate::model::{build_model, ActivationKind, ModelSpec, Normalization};

    fn cfg(axis: GroupAxis, eps: Vec<f64>) -> ScanConfig {
        ScanConfig { axis, eps_list: eps, template: ConstraintTemplate { p: NormOrder::Finite(2.0), n: None }, grad_split: Split::Train }
    }

    #[test]
    fn cells_cover_groups_and_leave_params_alone() {
        let data = load_dataset(&DatasetSource::synthetic(DatasetKind::TwoMoons, 200, 0)).unwrap();
        let spec = ModelSpec::mlp(vec![2, 6, 2], ActivationKind::Tanh, 0).with_normalization(Normalization::PerLayerScaleBias);
        let (model, params) = build_model(&spec).unwrap();
        let snapshot = params.clone();
        let r = scan(&model, &params, &data, &cfg(GroupAxis::Kind, vec![1e-3, 1e-2, 1e-1])).unwrap();
        assert_eq!(params, snapshot);
        let groups = param_groups_by(&params, GroupAxis::Kind);
        assert_eq!(r.cells.len(), groups.len() * 3);
        for (gi, (label, _)) in groups.iter().enumerate() {
            for (ei, e) in [1e-3, 1e-2, 1e-1].iter().enumerate() {
                let c = &r.cells[gi * 3 + ei];
                assert_eq!((&c.group_label, c.epsilon), (label, *e));
            }
        }
        assert!(r.cells.iter().all(|c| c.metric_before == r.cells[0].metric_before));
        assert!(r.cells.iter().filter(|c| !c.degenerate).all(|c| c.first_order > 0.0));
    }

    #[test]
    fn single_group_and_degenerate_cells() {
        let data = load_dataset(&DatasetSource::synthetic(DatasetKind::TwoMoons, 200, 0)).unwrap();
        // Zero weights give a zero gradient for the first layer's weights.
        let spec = ModelSpec::mlp(vec![2, 3, 2], ActivationKind::Tanh, 0);
        let (model, params) = build_model(&spec).unwrap();
        let zero = params.with_values(vec![0.0; params.len()]).unwrap();
        let r = scan(&model, &zero, &data, &cfg(GroupAxis::Layer, vec![0.1])).unwrap();
        assert_eq!(r.cells.len(), 2);
        assert!(r.cells[0].degenerate);
        assert_eq!(r.cells[0].metric_after, r.cells[0].metric_before);
        assert!(scan(&model, &zero, &data, &cfg(GroupAxis::Layer, vec![])).is_err());
        assert!(scan(&model, &zero, &data, &cfg(GroupAxis::Layer, vec![0.0])).is_err());
    }

    #[test]
    fn corruption_hurts_trained_classifier() {
        let data = load_dataset(&DatasetSource::synthetic(DatasetKind::TwoMoons, 400, 0)).unwrap();
        let spec = ModelSpec::mlp(vec![2, 8, 2], ActivationKind::Tanh, 0);
        let (model, _) = build_model(&spec).unwrap();
        let trained = train(&spec, &data, &AcrtConfig::baseline(0.1, 30, 32, 0), None).unwrap().params;
        let r = scan(&model, &trained, &data, &cfg(GroupAxis::Layer, vec![1e-3])).unwrap();
        for c in &r.cells {
            assert!(c.delta_loss > 0.0);
            assert!(c.metric_after <= c.metric_before + 0.01);
        }
    }
}

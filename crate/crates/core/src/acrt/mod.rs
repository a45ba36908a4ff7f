//! Corruption-resistant training.
//!
//! The direct objective mixes the clean loss with the loss at a virtual
//! gradient-based corruption `a` of the current weights:
//! `L* = (1 - alpha) L(w) + alpha L(w + a)`. To first order this equals
//! `L(w) + lambda ||g||_q` with `lambda = alpha * epsilon`, which is the
//! gradient-regularized objective.

mod optim;
mod table;
mod train;

pub use optim::{Optimizer, OptimizerKind};
pub use table::{corrupted_metric, epsilon_sweep, robustness_table, RobustnessRow, SweepPoint};
pub use train::{train, train_from, EpochLog, RunMeta, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::corruption::{gradient_corruption, perturb, CorruptionConstraint};
use crate::engine::{eval_grad, eval_loss, Model};
use crate::error::{Error, Result};
use crate::norms::{lp_norm, NormOrder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    DirectLstar,
    GradReg,
    Baseline,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct-lstar" => Ok(Variant::DirectLstar),
            "grad-reg" => Ok(Variant::GradReg),
            "baseline" => Ok(Variant::Baseline),
            other => Err(Error::validation(format!("unknown variant `{other}` (direct-lstar | grad-reg | baseline)"))),
        }
    }
}

/// Shape of the virtual corruption; the mask is always every parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualCorruption {
    pub p: NormOrder,
    /// Zero turns the corruption off.
    pub epsilon: f64,
    /// `None` means every parameter.
    #[serde(default)]
    pub n: Option<usize>,
}

impl VirtualCorruption {
    pub fn constraint(&self, k: usize) -> Result<Option<CorruptionConstraint>> {
        if self.epsilon == 0.0 {
            return Ok(None);
        }
        CorruptionConstraint::full(self.p, self.epsilon, self.n.unwrap_or(k).min(k), k).map(Some)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcrtConfig {
    pub variant: Variant,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    pub corruption: VirtualCorruption,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Epochs of plain training before the robust objective engages.
    #[serde(default)]
    pub warmup_epochs: usize,
    /// Step of the finite-difference Hessian-vector product (grad-reg).
    #[serde(default = "default_hvp_delta")]
    pub hvp_delta: f64,
}

fn default_momentum() -> f64 {
    0.9
}

fn default_hvp_delta() -> f64 {
    1e-4
}

impl AcrtConfig {
    pub fn baseline(learning_rate: f64, epochs: usize, batch_size: usize, seed: u64) -> Self {
        AcrtConfig {
            variant: Variant::Baseline,
            alpha: None,
            lambda: None,
            corruption: VirtualCorruption { p: NormOrder::Finite(2.0), epsilon: 0.0, n: None },
            optimizer: OptimizerKind::SgdMomentum,
            learning_rate,
            momentum: default_momentum(),
            epochs,
            batch_size,
            seed,
            warmup_epochs: 0,
            hvp_delta: default_hvp_delta(),
        }
    }

    /// Same schedule, direct objective with mixing weight `alpha` at `epsilon`.
    pub fn direct(&self, alpha: f64, epsilon: f64) -> Self {
        let mut c = self.clone();
        c.variant = Variant::DirectLstar;
        c.alpha = Some(alpha);
        c.corruption.epsilon = epsilon;
        c
    }

    /// Same schedule, gradient regularization with weight `lambda`.
    pub fn grad_reg(&self, lambda: f64, epsilon: f64) -> Self {
        let mut c = self.clone();
        c.variant = Variant::GradReg;
        c.lambda = Some(lambda);
        c.corruption.epsilon = epsilon;
        c
    }

    pub fn validate(&self) -> Result<()> {
        match self.variant {
            Variant::DirectLstar => match self.alpha {
                Some(a) if (0.0..=1.0).contains(&a) => {}
                Some(a) => return Err(Error::validation(format!("alpha must lie in [0, 1], got {a}"))),
                None => return Err(Error::validation("direct-lstar requires alpha")),
            },
            Variant::GradReg => match self.lambda {
                Some(l) if l >= 0.0 && l.is_finite() => {}
                Some(l) => return Err(Error::validation(format!("lambda must be finite and >= 0, got {l}"))),
                None => return Err(Error::validation("grad-reg requires lambda")),
            },
            Variant::Baseline => {}
        }
        let e = self.corruption.epsilon;
        if !(e >= 0.0 && e.is_finite()) {
            return Err(Error::validation(format!("epsilon must be finite and >= 0, got {e}")));
        }
        if self.corruption.n == Some(0) {
            return Err(Error::validation("n must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::validation("momentum must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be at least 1"));
        }
        if !(self.hvp_delta > 0.0) {
            return Err(Error::validation("hvp_delta must be positive"));
        }
        Ok(())
    }
}

/// One objective evaluation with its gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveStep {
    pub objective: f64,
    pub grad: Vec<f64>,
    /// `L(w)` on the batch.
    pub clean_loss: f64,
    /// `epsilon * ||h||_q` of the virtual corruption, when one was built.
    pub first_order: Option<f64>,
}

/// `L*` and the gradient `(1 - alpha) grad L(w) + alpha grad L(w + a)`, with `a` held fixed.
/// A vanishing gradient leaves no corruption to build; the plain loss is returned.
pub fn acrt_loss_direct(
    model: &dyn Model,
    params: &[f64],
    batch: &Batch,
    alpha: f64,
    c: &CorruptionConstraint,
) -> Result<ObjectiveStep> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::validation(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let clean = eval_grad(model, params, batch)?;
    let plain = |clean: crate::engine::GradReport| ObjectiveStep {
        objective: clean.loss,
        clean_loss: clean.loss,
        grad: clean.grad,
        first_order: None,
    };
    if alpha == 0.0 {
        return Ok(plain(clean));
    }
    let a = match gradient_corruption(&clean.grad, c) {
        Ok(a) => a,
        Err(Error::DegenerateDirection { .. }) => return Ok(plain(clean)),
        Err(e) => return Err(e),
    };
    let shifted = eval_grad(model, &perturb(params, &a)?, batch)?;
    let objective = (1.0 - alpha) * clean.loss + alpha * shifted.loss;
    let grad = clean.grad.iter().zip(&shifted.grad).map(|(g, s)| (1.0 - alpha) * g + alpha * s).collect();
    Ok(ObjectiveStep { objective, grad, clean_loss: clean.loss, first_order: Some(a.linear_value) })
}

/// `L(w) + lambda ||grad L(w)||_q`.
pub fn grad_reg_loss(model: &dyn Model, params: &[f64], batch: &Batch, lambda: f64, q: NormOrder) -> Result<f64> {
    if lambda == 0.0 {
        return eval_loss(model, params, batch);
    }
    let g = eval_grad(model, params, batch)?;
    Ok(g.loss + lambda * lp_norm(&g.grad, q))
}

/// Subgradient of `||.||_q` at `g`; zero when `||g||` is below `1e-12`.
pub fn norm_subgradient(g: &[f64], q: NormOrder) -> Vec<f64> {
    let max = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if crate::norms::l2_norm(g) < 1e-12 {
        return vec![0.0; g.len()];
    }
    match q {
        NormOrder::Finite(1.0) => g.iter().map(|x| if *x == 0.0 { 0.0 } else { x.signum() }).collect(),
        NormOrder::Finite(2.0) => {
            let n = crate::norms::l2_norm(g);
            g.iter().map(|x| x / n).collect()
        }
        NormOrder::Infinity => {
            let j = g.iter().position(|x| x.abs() == max).expect("nonempty");
            let mut u = vec![0.0; g.len()];
            u[j] = g[j].signum();
            u
        }
        NormOrder::Finite(q) => {
            let scaled = lp_norm(g, NormOrder::Finite(q)) / max;
            g.iter().map(|x| x.signum() * (x.abs() / max).powf(q - 1.0) / scaled.powf(q - 1.0)).collect()
        }
    }
}

/// Gradient of the regularized objective:
/// `grad L + lambda (g(w + delta u) - g(w - delta u)) / (2 delta)`.
pub fn grad_reg_grad(
    model: &dyn Model,
    params: &[f64],
    batch: &Batch,
    lambda: f64,
    q: NormOrder,
    delta: f64,
) -> Result<Vec<f64>> {
    Ok(grad_reg_step(model, params, batch, lambda, q, delta)?.grad)
}

pub(crate) fn grad_reg_step(
    model: &dyn Model,
    params: &[f64],
    batch: &Batch,
    lambda: f64,
    q: NormOrder,
    delta: f64,
) -> Result<ObjectiveStep> {
    if !(delta > 0.0) {
        return Err(Error::validation(format!("delta must be positive, got {delta}")));
    }
    let clean = eval_grad(model, params, batch)?;
    if lambda == 0.0 {
        return Ok(ObjectiveStep { objective: clean.loss, clean_loss: clean.loss, grad: clean.grad, first_order: None });
    }
    let norm = lp_norm(&clean.grad, q);
    let u = norm_subgradient(&clean.grad, q);
    let mut grad = clean.grad.clone();
    if u.iter().any(|&x| x != 0.0) {
        let hv = crate::indicator::hessian_vector_product(model, params, batch, &u, delta)?;
        grad.iter_mut().zip(&hv).for_each(|(g, h)| *g += lambda * h);
    }
    Ok(ObjectiveStep { objective: clean.loss + lambda * norm, clean_loss: clean.loss, grad, first_order: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{probe_batch, QuadraticProbe};
    use proptest::prelude::*;

    fn l2(eps: f64) -> CorruptionConstraint {
        CorruptionConstraint::full(NormOrder::Finite(2.0), eps, 2, 2).unwrap()
    }

    #[test]
    fn alpha_zero_is_plain_loss() {
        let m = QuadraticProbe::diagonal(vec![1.0, 3.0]).unwrap();
        let w = [0.7, -0.2];
        let s = acrt_loss_direct(&m, &w, &probe_batch(), 0.0, &l2(0.1)).unwrap();
        let g = eval_grad(&m, &w, &probe_batch()).unwrap();
        assert_eq!(s.objective, g.loss);
        assert_eq!(s.grad, g.grad);
        assert!(s.first_order.is_none());
    }

    #[test]
    fn alpha_one_closed_form_on_quadratic() {
        let m = QuadraticProbe::isotropic(2);
        let w = [3.0, 4.0];
        let eps = 0.1;
        let s = acrt_loss_direct(&m, &w, &probe_batch(), 1.0, &l2(eps)).unwrap();
        assert!((s.objective - 0.5 * (5.0f64 + eps).powi(2)).abs() < 1e-12);
        let f = 1.0 + eps / 5.0;
        assert!((s.grad[0] - f * 3.0).abs() < 1e-12 && (s.grad[1] - f * 4.0).abs() < 1e-12);
        assert_eq!(s.first_order, Some(0.5));
    }

    #[test]
    fn flat_point_falls_back_to_plain_loss() {
        let m = QuadraticProbe::isotropic(2);
        let s = acrt_loss_direct(&m, &[0.0, 0.0], &probe_batch(), 0.5, &l2(0.1)).unwrap();
        assert_eq!(s.objective, 0.0);
        assert!(s.first_order.is_none());
        let g = grad_reg_grad(&m, &[0.0, 0.0], &probe_batch(), 0.3, NormOrder::Finite(2.0), 1e-4).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn grad_reg_examples() {
        let m = QuadraticProbe::isotropic(2);
        let w = [3.0, 4.0];
        let b = probe_batch();
        assert_eq!(grad_reg_loss(&m, &w, &b, 0.0, NormOrder::Finite(2.0)).unwrap(), 12.5);
        assert!((grad_reg_loss(&m, &w, &b, 0.1, NormOrder::Finite(2.0)).unwrap() - 13.0).abs() < 1e-12);
        assert_eq!(grad_reg_grad(&m, &w, &b, 0.0, NormOrder::Finite(2.0), 1e-4).unwrap(), eval_grad(&m, &w, &b).unwrap().grad);
        // grad of lambda ||w|| is lambda w / ||w||.
        let g = grad_reg_grad(&m, &w, &b, 1.0, NormOrder::Finite(2.0), 1e-4).unwrap();
        assert!((g[0] - (3.0 + 0.6)).abs() < 1e-6 && (g[1] - (4.0 + 0.8)).abs() < 1e-6);
    }

    #[test]
    fn subgradients() {
        let g = [3.0, 0.0, -4.0];
        assert_eq!(norm_subgradient(&g, NormOrder::Finite(1.0)), vec![1.0, 0.0, -1.0]);
        assert_eq!(norm_subgradient(&g, NormOrder::Infinity), vec![0.0, 0.0, -1.0]);
        let u = norm_subgradient(&g, NormOrder::Finite(2.0));
        assert!((u[0] - 0.6).abs() < 1e-15 && (u[2] + 0.8).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let base = AcrtConfig::baseline(0.1, 1, 8, 0);
        assert!(base.validate().is_ok());
        assert!(base.direct(1.5, 0.1).validate().is_err());
        let mut missing = base.clone();
        missing.variant = Variant::GradReg;
        assert!(missing.validate().is_err());
        assert!(base.grad_reg(0.05, 0.1).validate().is_ok());
        assert!("bogus".parse::<Variant>().is_err());
    }

    proptest! {
        #[test]
        fn subgradient_attains_dual_pairing(g in prop::collection::vec(-5.0f64..5.0, 1..12), q in prop_oneof![Just(1.0), Just(2.0), 1.1f64..8.0]) {
            prop_assume!(crate::norms::l2_norm(&g) > 1e-6);
            let q = NormOrder::Finite(q);
            let u = norm_subgradient(&g, q);
            // u . g = ||g||_q and ||u||_p = 1 for the dual p.
            prop_assert!((crate::norms::dot(&u, &g) - lp_norm(&g, q)).abs() <= 1e-9 * lp_norm(&g, q).max(1.0));
            prop_assert!((lp_norm(&u, q.dual()) - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn l1_regularizer_dominates_l2(g in prop::collection::vec(-5.0f64..5.0, 1..12)) {
            prop_assert!(lp_norm(&g, NormOrder::Finite(1.0)) >= lp_norm(&g, NormOrder::Finite(2.0)) - 1e-12);
        }
    }
}

//! Analytic probe losses with known gradients and Hessians.

use crate::batch::{Batch, Targets};
use crate::engine::{LossKind, Model, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `L(w) = 0.5 * sum_i d_i w_i^2`; ignores the batch. Hessian is `diag(d)`.
#[derive(Clone, Debug)]
pub struct QuadraticProbe {
    diag: Vec<f64>,
}

impl QuadraticProbe {
    /// `0.5 * ||w||^2`.
    pub fn isotropic(k: usize) -> Self {
        QuadraticProbe { diag: vec![1.0; k] }
    }

    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || diag.iter().any(|d| !d.is_finite()) {
            return Err(Error::validation("probe diagonal must be nonempty and finite"));
        }
        Ok(QuadraticProbe { diag })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

impl Model for QuadraticProbe {
    fn param_count(&self) -> usize {
        self.diag.len()
    }

    fn loss_on_tape(&self, tape: &mut Tape, params: &[f64], _batch: &Batch) -> Result<Var> {
        let w = tape.param(params, 0, vec![self.diag.len()])?;
        tape.half_weighted_squares(w, &self.diag)
    }

    fn loss_kind(&self) -> LossKind {
        LossKind::Probe
    }
}

/// A loss that never changes.
#[derive(Clone, Debug)]
pub struct ConstantModel {
    pub k: usize,
    pub value: f64,
}

impl Model for ConstantModel {
    fn param_count(&self) -> usize {
        self.k
    }

    fn loss_on_tape(&self, tape: &mut Tape, params: &[f64], _batch: &Batch) -> Result<Var> {
        // value + 0.5 * ||0 * w||^2 keeps the parameters on the tape.
        let w = tape.param(params, 0, vec![self.k])?;
        let zero = tape.scale(w, 0.0)?;
        let sq = tape.half_weighted_squares(zero, &vec![1.0; self.k])?;
        let c = tape.constant(Tensor::scalar(self.value))?;
        tape.add_row(sq, c)
    }

    fn loss_kind(&self) -> LossKind {
        LossKind::Probe
    }
}

/// One-row placeholder batch for probe models.
pub fn probe_batch() -> Batch {
    Batch::new(Tensor::zeros(vec![1, 1]), Targets::Classes(vec![0])).expect("static batch")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{eval_grad, eval_loss, finite_diff_grad};

    #[test]
    fn quadratic_probe_gradient() {
        let m = QuadraticProbe::isotropic(2);
        let r = eval_grad(&m, &[3.0, 4.0], &probe_batch()).unwrap();
        assert_eq!(r.loss, 12.5);
        assert_eq!(r.grad, vec![3.0, 4.0]);
        assert_eq!(r.grad_l2, 5.0);
        let fd = finite_diff_grad(&m, &[3.0, 4.0], &probe_batch(), 1e-3).unwrap();
        assert!((fd[0] - 3.0).abs() < 1e-6 && (fd[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn constant_model_is_flat() {
        let m = ConstantModel { k: 3, value: 2.5 };
        let w = [1.0, -2.0, 3.0];
        assert_eq!(eval_loss(&m, &w, &probe_batch()).unwrap(), 2.5);
        assert_eq!(eval_grad(&m, &w, &probe_batch()).unwrap().grad, vec![0.0; 3]);
        assert_eq!(finite_diff_grad(&m, &w, &probe_batch(), 1e-3).unwrap(), vec![0.0; 3]);
        assert!(finite_diff_grad(&m, &w, &probe_batch(), 0.0).is_err());
    }
}

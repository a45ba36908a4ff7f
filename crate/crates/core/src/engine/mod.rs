//! Loss and gradient evaluation for models built on the [`Tape`].

mod tape;

pub use tape::{Activation, Tape, Var};

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::error::{Error, Result};
use crate::norms::l2_norm;
use crate::tensor::Tensor;

/// A differentiable model over a flat parameter vector.
///
/// Implementations are immutable after construction and hold no per-call
/// state, so evaluation is pure and may run from several threads.
pub trait Model: Send + Sync + Debug {
    fn param_count(&self) -> usize;

    /// Records the forward pass on `tape` and returns the scalar mean loss.
    fn loss_on_tape(&self, tape: &mut Tape, params: &[f64], batch: &Batch) -> Result<Var>;

    /// Raw outputs (logits or regression values), one row per input row.
    fn outputs(&self, _params: &[f64], _inputs: &Tensor) -> Result<Tensor> {
        Err(Error::UnsupportedMetric { metric: "outputs".into() })
    }

    fn loss_kind(&self) -> LossKind;

    /// False when a nonsmooth activation (ReLU) is present.
    fn is_smooth(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    CrossEntropy,
    Mse,
    /// Analytic probe losses that ignore the batch.
    Probe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Euclidean norm of `grad`.
    pub grad_l2: f64,
}

fn check_params(model: &dyn Model, params: &[f64]) -> Result<()> {
    if params.len() != model.param_count() {
        return Err(Error::incompatible(format!(
            "model expects {} parameters, got {}",
            model.param_count(),
            params.len()
        )));
    }
    Ok(())
}

/// Mean per-example loss.
pub fn eval_loss(model: &dyn Model, params: &[f64], batch: &Batch) -> Result<f64> {
    check_params(model, params)?;
    let mut tape = Tape::new();
    let loss = model.loss_on_tape(&mut tape, params, batch)?;
    Ok(tape.value(loss).data()[0])
}

/// Loss and its exact gradient with respect to every parameter.
pub fn eval_grad(model: &dyn Model, params: &[f64], batch: &Batch) -> Result<GradReport> {
    check_params(model, params)?;
    let mut tape = Tape::new();
    let loss = model.loss_on_tape(&mut tape, params, batch)?;
    let mut grad = vec![0.0; params.len()];
    tape.backward(loss, &mut grad)?;
    Ok(GradReport { loss: tape.value(loss).data()[0], grad_l2: l2_norm(&grad), grad })
}

/// Central-difference gradient, one coordinate at a time (2k loss evaluations).
pub fn finite_diff_grad(model: &dyn Model, params: &[f64], batch: &Batch, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::validation(format!("finite-difference step must be positive, got {step}")));
    }
    check_params(model, params)?;
    let mut probe = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = eval_loss(model, &probe, batch)?;
        probe[i] = orig - step;
        let down = eval_loss(model, &probe, batch)?;
        probe[i] = orig;
        let d = (up - down) / (2.0 * step);
        if !d.is_finite() {
            return Err(Error::NumericOverflow(format!("finite-difference probe at coordinate {i}")));
        }
        out.push(d);
    }
    Ok(out)
}

/// Largest componentwise `|a_i - b_i| / max(|a_i|, |b_i|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs() / x.abs().max(y.abs()).max(floor)))
}

/// Multiplies another model's loss by a constant factor.
#[derive(Debug)]
pub struct Scaled<M> {
    pub inner: M,
    pub factor: f64,
}

impl<M: Model> Model for Scaled<M> {
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn loss_on_tape(&self, tape: &mut Tape, params: &[f64], batch: &Batch) -> Result<Var> {
        let l = self.inner.loss_on_tape(tape, params, batch)?;
        tape.scale(l, self.factor)
    }

    fn outputs(&self, params: &[f64], inputs: &Tensor) -> Result<Tensor> {
        self.inner.outputs(params, inputs)
    }

    fn loss_kind(&self) -> LossKind {
        self.inner.loss_kind()
    }

    fn is_smooth(&self) -> bool {
        self.inner.is_smooth()
    }
}

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{acrt_loss_direct, grad_reg_step, AcrtConfig, ObjectiveStep, Optimizer, OptimizerKind, Variant};
use crate::data::Dataset;
use crate::engine::{eval_grad, Model};
use crate::error::{Error, Result};
use crate::model::{build_model, default_metric, MetricValue, ModelSpec};
use crate::norms::NormOrder;
use crate::params::FlatParams;
use crate::rng::RngState;

const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training objective over the epoch's batches.
    pub train_loss: f64,
    /// Mean clean loss `L(w; B)` over the same batches.
    pub clean_loss: f64,
    pub eval_metric: MetricValue,
    /// Mean `epsilon * ||h||_q` of the virtual corruptions (direct objective only).
    pub mean_first_order: Option<f64>,
    pub robust_active: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub variant: Variant,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub epsilon: f64,
    pub p: NormOrder,
    pub q: NormOrder,
    /// `alpha * epsilon`, the regularization weight matching the direct objective to first order.
    pub equivalent_lambda: Option<f64>,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub params: FlatParams,
    pub log: Vec<EpochLog>,
    pub meta: RunMeta,
}

/// Builds the model from `spec` and trains it.
pub fn train(spec: &ModelSpec, data: &Dataset, config: &AcrtConfig, log: Option<&mut dyn Write>) -> Result<TrainOutcome> {
    let (model, init) = build_model(spec)?;
    train_from(&model, init, data, config, log)
}

/// Trains from `init`; when `log` is given, each epoch is written as one JSON line.
pub fn train_from(
    model: &dyn Model,
    init: FlatParams,
    data: &Dataset,
    config: &AcrtConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let k = init.len();
    let constraint = config.corruption.constraint(k)?;
    let q = config.corruption.p.dual();
    let meta = RunMeta {
        variant: config.variant,
        alpha: config.alpha,
        lambda: config.lambda,
        epsilon: config.corruption.epsilon,
        p: config.corruption.p,
        q,
        equivalent_lambda: config.alpha.map(|a| a * config.corruption.epsilon),
        optimizer: config.optimizer,
        seed: config.seed,
    };
    let mut w = init.values().to_vec();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, config.momentum, k);
    let mut rng = RngState::new(config.seed);
    let n = data.train.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut records = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let robust = epoch >= config.warmup_epochs;
        let (mut obj_sum, mut clean_sum, mut fo_sum, mut fo_count, mut batches) = (0.0, 0.0, 0.0, 0usize, 0usize);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = data.train.select(chunk);
            let step = match (config.variant, robust) {
                (Variant::DirectLstar, true) => match &constraint {
                    Some(c) => acrt_loss_direct(model, &w, &batch, config.alpha.unwrap_or(0.0), c),
                    None => plain(model, &w, &batch),
                },
                (Variant::GradReg, true) => {
                    grad_reg_step(model, &w, &batch, config.lambda.unwrap_or(0.0), q, config.hvp_delta)
                }
                _ => plain(model, &w, &batch),
            }
            .map_err(|e| match e {
                Error::NumericOverflow(m) => Error::NumericOverflow(format!("epoch {epoch}, batch {b}: {m}")),
                other => other,
            })?;
            if !step.objective.is_finite() || step.objective > DIVERGENCE_LOSS {
                return Err(Error::Divergence { epoch, batch: b, loss: step.objective });
            }
            obj_sum += step.objective;
            clean_sum += step.clean_loss;
            if let Some(f) = step.first_order {
                fo_sum += f;
                fo_count += 1;
            }
            batches += 1;
            opt.step(&mut w, &step.grad);
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence { epoch, batch: b, loss: f64::NAN });
            }
        }
        let record = EpochLog {
            epoch,
            train_loss: obj_sum / batches as f64,
            clean_loss: clean_sum / batches as f64,
            eval_metric: default_metric(model, &w, &data.eval)?,
            mean_first_order: (fo_count > 0).then(|| fo_sum / fo_count as f64),
            robust_active: robust && config.variant != Variant::Baseline,
        };
        if let Some(sink) = log.as_deref_mut() {
            serde_json::to_writer(&mut *sink, &record)?;
            sink.write_all(b"\n").map_err(|e| Error::io("<run log>", e))?;
        }
        records.push(record);
    }
    Ok(TrainOutcome { params: init.with_values(w)?, log: records, meta })
}

fn plain(model: &dyn Model, w: &[f64], batch: &crate::batch::Batch) -> Result<ObjectiveStep> {
    let g = eval_grad(model, w, batch)?;
    Ok(ObjectiveStep { objective: g.loss, clean_loss: g.loss, grad: g.grad, first_order: None })
}

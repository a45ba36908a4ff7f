//! Desk-scale models with typed parameter groups.

mod network;
mod probes;

pub use network::{build_model, Network};
pub use probes::{probe_batch, ConstantModel, QuadraticProbe};

use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::engine::{eval_loss, LossKind, Model};
use crate::error::{Error, Result};
use crate::params::FlatParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Mlp,
    ConvnetSmall,
    LinearSoftmax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationKind {
    Tanh,
    Relu,
    Softplus,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    /// Learnable per-feature scale and bias after each hidden layer.
    PerLayerScaleBias,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossSpec {
    CrossEntropy,
    Mse,
}

/// Everything needed to rebuild a model and its initial parameters.
///
/// For `mlp` and `linear-softmax`, `layer_sizes` lists layer widths from
/// input to output. For `convnet-small` it is `[in_channels, conv_channels..,
/// classes]`: 3x3 same-padded convolutions, global average pooling, then one
/// fully-connected output layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub layer_sizes: Vec<usize>,
    pub activation: ActivationKind,
    #[serde(default)]
    pub normalization: Normalization,
    pub loss: LossSpec,
    pub seed: u64,
}

impl ModelSpec {
    pub fn mlp(layer_sizes: Vec<usize>, activation: ActivationKind, seed: u64) -> Self {
        ModelSpec {
            architecture: Architecture::Mlp,
            layer_sizes,
            activation,
            normalization: Normalization::None,
            loss: LossSpec::CrossEntropy,
            seed,
        }
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::validation("layer_sizes needs at least an input and an output size"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::validation("layer sizes must be at least 1"));
        }
        if self.architecture == Architecture::LinearSoftmax {
            if self.layer_sizes.len() != 2 {
                return Err(Error::validation("linear-softmax takes exactly [inputs, classes]"));
            }
            if self.loss != LossSpec::CrossEntropy {
                return Err(Error::validation("linear-softmax requires cross-entropy loss"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricName {
    Accuracy,
    MeanLoss,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: MetricName,
    pub value: f64,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose argmax output equals the target class.
pub fn accuracy(model: &dyn Model, params: &[f64], data: &Batch) -> Result<MetricValue> {
    let classes = match (model.loss_kind(), data.classes()) {
        (LossKind::CrossEntropy, Some(c)) => c,
        _ => return Err(Error::UnsupportedMetric { metric: "accuracy".into() }),
    };
    let out = model.outputs(params, &data.inputs)?;
    let correct = classes
        .iter()
        .enumerate()
        .filter(|&(i, &t)| argmax(out.row(i)) == t)
        .count();
    Ok(MetricValue { name: MetricName::Accuracy, value: correct as f64 / classes.len() as f64 })
}

/// Accuracy for classifiers, mean loss otherwise.
pub fn default_metric(model: &dyn Model, params: &[f64], data: &Batch) -> Result<MetricValue> {
    match model.loss_kind() {
        LossKind::CrossEntropy => accuracy(model, params, data),
        _ => Ok(MetricValue { name: MetricName::MeanLoss, value: eval_loss(model, params, data)? }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupAxis {
    Kind,
    Layer,
}

impl std::str::FromStr for GroupAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kind" => Ok(GroupAxis::Kind),
            "layer" => Ok(GroupAxis::Layer),
            _ => Err(Error::validation(format!("unknown group axis `{s}` (kind|layer)"))),
        }
    }
}

/// Partitions parameter indices by group kind or by layer.
///
/// Kind labels sort lexicographically; layer labels (`layer0`, `layer1`, ..)
/// sort by layer index. Each mask is sorted ascending.
pub fn param_groups_by(params: &FlatParams, axis: GroupAxis) -> Vec<(String, Vec<usize>)> {
    let mut buckets: std::collections::BTreeMap<(usize, String), Vec<usize>> = Default::default();
    for g in params.groups() {
        let key = match axis {
            GroupAxis::Kind => (0, g.kind.label().to_string()),
            GroupAxis::Layer => (g.layer, format!("layer{}", g.layer)),
        };
        buckets.entry(key).or_default().extend(g.range());
    }
    buckets
        .into_iter()
        .map(|((_, label), mut mask)| {
            mask.sort_unstable();
            (label, mask)
        })
        .collect()
}

use crate::batch::{Batch, Targets};
use crate::engine::{Activation, LossKind, Model, Tape, Var};
use crate::error::{Error, Result};
use crate::params::{FlatParams, GroupKind, ParamGroup};
use crate::rng::RngState;
use crate::tensor::Tensor;

use super::{ActivationKind, Architecture, LossSpec, ModelSpec, Normalization};

#[derive(Clone, Copy, Debug)]
struct Norm {
    scale: usize,
    bias: usize,
}

#[derive(Clone, Copy, Debug)]
enum Layer {
    Dense { weight: usize, bias: usize, fan_in: usize, fan_out: usize, norm: Option<Norm>, hidden: bool },
    Conv { weight: usize, bias: usize, in_c: usize, out_c: usize, norm: Option<Norm> },
}

/// A feed-forward network built from a [`ModelSpec`].
#[derive(Clone, Debug)]
pub struct Network {
    spec: ModelSpec,
    layers: Vec<Layer>,
    param_count: usize,
}

struct Layout {
    groups: Vec<ParamGroup>,
    next: usize,
}

impl Layout {
    fn add(&mut self, name: String, len: usize, kind: GroupKind, layer: usize) -> usize {
        let offset = self.next;
        self.groups.push(ParamGroup { name, offset, len, kind, layer });
        self.next += len;
        offset
    }

    fn norm(&mut self, layer: usize, width: usize, enabled: bool) -> Option<Norm> {
        enabled.then(|| Norm {
            scale: self.add(format!("layer{layer}.norm_scale"), width, GroupKind::NormalizationScale, layer),
            bias: self.add(format!("layer{layer}.norm_bias"), width, GroupKind::NormalizationBias, layer),
        })
    }
}

/// Builds the network and its deterministic initial parameters.
///
/// Weights are uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases are
/// zero and normalization scales one. Values are rounded to `f32`.
pub fn build_model(spec: &ModelSpec) -> Result<(Network, FlatParams)> {
    spec.validate()?;
    let sizes = &spec.layer_sizes;
    let normed = spec.normalization == Normalization::PerLayerScaleBias;
    let mut layout = Layout { groups: Vec::new(), next: 0 };
    let mut layers = Vec::new();

    match spec.architecture {
        Architecture::Mlp | Architecture::LinearSoftmax => {
            let last = sizes.len() - 2;
            for (l, pair) in sizes.windows(2).enumerate() {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let hidden = l < last;
                let weight = layout.add(format!("layer{l}.weight"), fan_in * fan_out, GroupKind::FullyConnected, l);
                let bias = layout.add(format!("layer{l}.bias"), fan_out, GroupKind::Bias, l);
                let norm = layout.norm(l, fan_out, normed && hidden);
                layers.push(Layer::Dense { weight, bias, fan_in, fan_out, norm, hidden });
            }
        }
        Architecture::ConvnetSmall => {
            let convs = sizes.len() - 2;
            for l in 0..convs {
                let (in_c, out_c) = (sizes[l], sizes[l + 1]);
                let weight = layout.add(format!("layer{l}.weight"), out_c * in_c * 9, GroupKind::Convolution, l);
                let bias = layout.add(format!("layer{l}.bias"), out_c, GroupKind::Bias, l);
                let norm = layout.norm(l, out_c, normed);
                layers.push(Layer::Conv { weight, bias, in_c, out_c, norm });
            }
            let (fan_in, fan_out) = (sizes[convs], sizes[convs + 1]);
            let weight = layout.add(format!("layer{convs}.weight"), fan_in * fan_out, GroupKind::FullyConnected, convs);
            let bias = layout.add(format!("layer{convs}.bias"), fan_out, GroupKind::Bias, convs);
            layers.push(Layer::Dense { weight, bias, fan_in, fan_out, norm: None, hidden: false });
        }
    }

    let k = layout.next;
    let mut values = vec![0.0; k];
    let mut rng = RngState::new(spec.seed);
    for layer in &layers {
        let (weight, len, fan_in, norm) = match *layer {
            Layer::Dense { weight, fan_in, fan_out, norm, .. } => (weight, fan_in * fan_out, fan_in, norm),
            Layer::Conv { weight, in_c, out_c, norm, .. } => (weight, out_c * in_c * 9, in_c * 9, norm),
        };
        let bound = 1.0 / (fan_in as f64).sqrt();
        for v in &mut values[weight..weight + len] {
            *v = bound * (2.0 * rng.uniform() - 1.0);
        }
        if let Some(n) = norm {
            let width = layout.groups.iter().find(|g| g.offset == n.scale).map(|g| g.len).unwrap_or(0);
            values[n.scale..n.scale + width].fill(1.0);
        }
    }
    let mut params = FlatParams::new(values, layout.groups)?;
    params.round_to_f32();
    Ok((Network { spec: spec.clone(), layers, param_count: k }, params))
}

impl Network {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn activation(&self) -> Activation {
        match self.spec.activation {
            ActivationKind::Tanh => Activation::Tanh,
            ActivationKind::Relu => Activation::Relu,
            ActivationKind::Softplus => Activation::Softplus,
        }
    }

    fn input_var(&self, tape: &mut Tape, inputs: &Tensor) -> Result<Var> {
        let first = self.spec.layer_sizes[0];
        let shaped = match self.spec.architecture {
            Architecture::ConvnetSmall => {
                if inputs.shape().len() != 4 || inputs.shape()[1] != first {
                    return Err(Error::incompatible(format!(
                        "convnet expects [N, {first}, H, W] inputs, got {:?}",
                        inputs.shape()
                    )));
                }
                inputs.clone()
            }
            _ => {
                if inputs.row_len() != first {
                    return Err(Error::incompatible(format!(
                        "model expects {first} input features, got {:?}",
                        inputs.shape()
                    )));
                }
                inputs.clone().reshape(vec![inputs.rows(), first])?
            }
        };
        tape.constant(shaped)
    }

    /// Records the forward pass and returns the output (logits) node.
    pub fn forward(&self, tape: &mut Tape, params: &[f64], inputs: &Tensor) -> Result<Var> {
        if params.len() != self.param_count {
            return Err(Error::incompatible(format!(
                "model expects {} parameters, got {}",
                self.param_count,
                params.len()
            )));
        }
        let act = self.activation();
        let mut h = self.input_var(tape, inputs)?;
        let mut pooled = false;
        for layer in &self.layers {
            match *layer {
                Layer::Conv { weight, bias, in_c, out_c, norm } => {
                    let w = tape.param(params, weight, vec![out_c, in_c, 3, 3])?;
                    let b = tape.param(params, bias, vec![out_c])?;
                    h = tape.conv3x3(h, w, b)?;
                    if let Some(n) = norm {
                        let s = tape.param(params, n.scale, vec![out_c])?;
                        let nb = tape.param(params, n.bias, vec![out_c])?;
                        h = tape.channel_affine(h, s, nb)?;
                    }
                    h = tape.activation(h, act)?;
                }
                Layer::Dense { weight, bias, fan_in, fan_out, norm, hidden } => {
                    if self.spec.architecture == Architecture::ConvnetSmall && !pooled {
                        h = tape.global_avg_pool(h)?;
                        pooled = true;
                    }
                    let w = tape.param(params, weight, vec![fan_in, fan_out])?;
                    let b = tape.param(params, bias, vec![fan_out])?;
                    h = tape.matmul(h, w)?;
                    h = tape.add_row(h, b)?;
                    if let Some(n) = norm {
                        let s = tape.param(params, n.scale, vec![fan_out])?;
                        let nb = tape.param(params, n.bias, vec![fan_out])?;
                        h = tape.mul_row(h, s)?;
                        h = tape.add_row(h, nb)?;
                    }
                    if hidden {
                        h = tape.activation(h, act)?;
                    }
                }
            }
        }
        Ok(h)
    }
}

impl Model for Network {
    fn param_count(&self) -> usize {
        self.param_count
    }

    fn loss_on_tape(&self, tape: &mut Tape, params: &[f64], batch: &Batch) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::validation("empty batch"));
        }
        let out = self.forward(tape, params, &batch.inputs)?;
        match (self.spec.loss, &batch.targets) {
            (LossSpec::CrossEntropy, Targets::Classes(c)) => tape.softmax_cross_entropy(out, c),
            (LossSpec::Mse, Targets::Values(t)) => tape.mean_squared_error(out, t),
            (LossSpec::CrossEntropy, _) => Err(Error::incompatible("cross-entropy needs class targets")),
            (LossSpec::Mse, _) => Err(Error::incompatible("mse needs real-valued targets")),
        }
    }

    fn outputs(&self, params: &[f64], inputs: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, params, inputs)?;
        Ok(tape.value(out).clone())
    }

    fn loss_kind(&self) -> LossKind {
        match self.spec.loss {
            LossSpec::CrossEntropy => LossKind::CrossEntropy,
            LossSpec::Mse => LossKind::Mse,
        }
    }

    fn is_smooth(&self) -> bool {
        self.spec.activation != ActivationKind::Relu
    }
}

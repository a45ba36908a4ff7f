//! Wengert tape for feed-forward graphs.
//!
//! Every op is recorded with its output during the forward pass; `backward`
//! walks the tape in reverse and accumulates adjoints. Reductions run in a
//! fixed sequential order so results are bit-reproducible.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Softplus,
}

#[derive(Debug)]
enum Op {
    Constant,
    /// Slice `[offset, offset + len)` of the flat parameter vector.
    Param { offset: usize },
    /// `[m, k] x [k, n]`.
    MatMul { a: Var, b: Var },
    /// `x[.., j] + b[j]` over the last axis.
    AddRow { x: Var, b: Var },
    /// `x[.., j] * s[j]` over the last axis.
    MulRow { x: Var, s: Var },
    /// Per-channel `x * s[c] + b[c]` for `[N, C, H, W]`.
    ChannelAffine { x: Var, s: Var, b: Var },
    Act { x: Var, kind: Activation },
    /// 3x3 convolution, stride 1, zero padding 1, with bias.
    Conv3x3 { x: Var, w: Var, b: Var },
    /// `[N, C, H, W] -> [N, C]`.
    GlobalAvgPool { x: Var },
    /// Mean over rows of `logsumexp(z) - z[target]`.
    SoftmaxCrossEntropy { logits: Var, targets: Vec<usize> },
    /// Mean over all entries of `(pred - target)^2`.
    MeanSquaredError { pred: Var, target: Vec<f64> },
    /// `0.5 * sum_i d_i x_i^2`.
    HalfWeightedSquares { x: Var, diag: Vec<f64> },
    Scale { x: Var, factor: f64 },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var> {
        if let Some(i) = value.first_non_finite() {
            return Err(Error::NumericOverflow(format!(
                "non-finite value at flat index {i} in output of {}",
                op_name(&op)
            )));
        }
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push(Op::Constant, value)
    }

    /// Loads `shape` values starting at `offset` from the flat parameter vector.
    pub fn param(&mut self, params: &[f64], offset: usize, shape: Vec<usize>) -> Result<Var> {
        let len: usize = shape.iter().product();
        if offset + len > params.len() {
            return Err(Error::incompatible(format!(
                "parameter slice [{offset}, {}) exceeds vector of length {}",
                offset + len,
                params.len()
            )));
        }
        let value = Tensor::from_raw(shape, params[offset..offset + len].to_vec());
        self.push(Op::Param { offset }, value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(Error::incompatible(format!(
                "matmul {:?} x {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let (ad, bd) = (ta.data(), tb.data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = ad[i * k + p];
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &bv) in row.iter_mut().zip(brow) {
                    *o += aip * bv;
                }
            }
        }
        self.push(Op::MatMul { a, b }, Tensor::from_raw(vec![m, n], out))
    }

    fn check_row_op(&self, x: Var, v: Var, what: &str) -> Result<usize> {
        let n = *self.value(x).shape().last().unwrap();
        if self.value(v).len() != n {
            return Err(Error::incompatible(format!(
                "{what}: vector of length {} against last axis {n}",
                self.value(v).len()
            )));
        }
        Ok(n)
    }

    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let n = self.check_row_op(x, b, "add_row")?;
        let bd = self.value(b).data();
        let tx = self.value(x);
        let data = tx.data().iter().enumerate().map(|(i, v)| v + bd[i % n]).collect();
        let value = Tensor::from_raw(tx.shape().to_vec(), data);
        self.push(Op::AddRow { x, b }, value)
    }

    pub fn mul_row(&mut self, x: Var, s: Var) -> Result<Var> {
        let n = self.check_row_op(x, s, "mul_row")?;
        let sd = self.value(s).data();
        let tx = self.value(x);
        let data = tx.data().iter().enumerate().map(|(i, v)| v * sd[i % n]).collect();
        let value = Tensor::from_raw(tx.shape().to_vec(), data);
        self.push(Op::MulRow { x, s }, value)
    }

    pub fn channel_affine(&mut self, x: Var, s: Var, b: Var) -> Result<Var> {
        let tx = self.value(x);
        if tx.shape().len() != 4 {
            return Err(Error::incompatible(format!("channel_affine on {:?}", tx.shape())));
        }
        let (c, hw) = (tx.shape()[1], tx.shape()[2] * tx.shape()[3]);
        if self.value(s).len() != c || self.value(b).len() != c {
            return Err(Error::incompatible("channel_affine: scale/bias length".to_string()));
        }
        let (sd, bd) = (self.value(s).data(), self.value(b).data());
        let data = tx
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let ch = (i / hw) % c;
                v * sd[ch] + bd[ch]
            })
            .collect();
        let value = Tensor::from_raw(tx.shape().to_vec(), data);
        self.push(Op::ChannelAffine { x, s, b }, value)
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var> {
        let tx = self.value(x);
        let f: fn(f64) -> f64 = match kind {
            Activation::Tanh => f64::tanh,
            Activation::Relu => |v| v.max(0.0),
            Activation::Softplus => softplus,
        };
        let value = Tensor::from_raw(tx.shape().to_vec(), tx.data().iter().map(|&v| f(v)).collect());
        self.push(Op::Act { x, kind }, value)
    }

    pub fn conv3x3(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (tx, tw) = (self.value(x), self.value(w));
        let xs = tx.shape();
        let ws = tw.shape();
        if xs.len() != 4 || ws.len() != 4 || ws[1] != xs[1] || ws[2] != 3 || ws[3] != 3 {
            return Err(Error::incompatible(format!("conv3x3 input {xs:?} with kernel {ws:?}")));
        }
        let (n, c, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let o = ws[0];
        if self.value(b).len() != o {
            return Err(Error::incompatible("conv3x3: bias length".to_string()));
        }
        let (xd, wdat, bd) = (tx.data(), tw.data(), self.value(b).data());
        let mut out = vec![0.0; n * o * h * wd];
        for img in 0..n {
            for oc in 0..o {
                for y in 0..h {
                    for xx in 0..wd {
                        let mut acc = bd[oc];
                        for ic in 0..c {
                            for ky in 0..3 {
                                let iy = y as isize + ky as isize - 1;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..3 {
                                    let ix = xx as isize + kx as isize - 1;
                                    if ix < 0 || ix >= wd as isize {
                                        continue;
                                    }
                                    let xi = ((img * c + ic) * h + iy as usize) * wd + ix as usize;
                                    let wi = ((oc * c + ic) * 3 + ky) * 3 + kx;
                                    acc += xd[xi] * wdat[wi];
                                }
                            }
                        }
                        out[((img * o + oc) * h + y) * wd + xx] = acc;
                    }
                }
            }
        }
        self.push(Op::Conv3x3 { x, w, b }, Tensor::from_raw(vec![n, o, h, wd], out))
    }

    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let tx = self.value(x);
        if tx.shape().len() != 4 {
            return Err(Error::incompatible(format!("global_avg_pool on {:?}", tx.shape())));
        }
        let (n, c, hw) = (tx.shape()[0], tx.shape()[1], tx.shape()[2] * tx.shape()[3]);
        let data = tx
            .data()
            .chunks(hw)
            .map(|ch| ch.iter().sum::<f64>() / hw as f64)
            .collect();
        self.push(Op::GlobalAvgPool { x }, Tensor::from_raw(vec![n, c], data))
    }

    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let tz = self.value(logits);
        if tz.shape().len() != 2 || tz.shape()[0] != targets.len() {
            return Err(Error::incompatible(format!(
                "cross-entropy logits {:?} against {} targets",
                tz.shape(),
                targets.len()
            )));
        }
        let c = tz.shape()[1];
        if let Some(&t) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::incompatible(format!("class index {t} with {c} outputs")));
        }
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let row = tz.row(i);
            total += log_sum_exp(row) - row[t];
        }
        let value = Tensor::scalar(total / targets.len() as f64);
        self.push(Op::SoftmaxCrossEntropy { logits, targets: targets.to_vec() }, value)
    }

    pub fn mean_squared_error(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let tp = self.value(pred);
        if tp.len() != target.len() || tp.rows() != target.rows() {
            return Err(Error::incompatible(format!(
                "mse prediction {:?} against target {:?}",
                tp.shape(),
                target.shape()
            )));
        }
        let sum = tp
            .data()
            .iter()
            .zip(target.data())
            .fold(0.0, |acc, (p, t)| acc + (p - t) * (p - t));
        let value = Tensor::scalar(sum / tp.len() as f64);
        self.push(Op::MeanSquaredError { pred, target: target.data().to_vec() }, value)
    }

    pub fn half_weighted_squares(&mut self, x: Var, diag: &[f64]) -> Result<Var> {
        let tx = self.value(x);
        if tx.len() != diag.len() {
            return Err(Error::incompatible("half_weighted_squares: diagonal length".to_string()));
        }
        let sum = tx.data().iter().zip(diag).fold(0.0, |acc, (v, d)| acc + d * v * v);
        self.push(Op::HalfWeightedSquares { x, diag: diag.to_vec() }, Tensor::scalar(0.5 * sum))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let tx = self.value(x);
        let value = Tensor::from_raw(tx.shape().to_vec(), tx.data().iter().map(|v| v * factor).collect());
        self.push(Op::Scale { x, factor }, value)
    }

    /// Reverse sweep from the scalar `root`; parameter adjoints are added into `grad`.
    pub fn backward(&self, root: Var, grad: &mut [f64]) -> Result<()> {
        if self.value(root).len() != 1 {
            return Err(Error::incompatible("backward from a non-scalar node".to_string()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = (0..=root.0).map(|_| None).collect();
        adj[root.0] = Some(vec![1.0]);

        for idx in (0..=root.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param { offset } => {
                    for (dst, v) in grad[*offset..*offset + g.len()].iter_mut().zip(&g) {
                        *dst += v;
                    }
                }
                Op::MatMul { a, b } => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                    let (ad, bd) = (ta.data(), tb.data());
                    let mut ga = vec![0.0; m * k];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            ga[i * k + p] = dot(grow, &bd[p * n..(p + 1) * n]);
                        }
                    }
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = ad[i * k + p];
                            for (o, &gv) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *o += aip * gv;
                            }
                        }
                    }
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::AddRow { x, b } => {
                    let n = self.value(*b).len();
                    let mut gb = vec![0.0; n];
                    for (i, v) in g.iter().enumerate() {
                        gb[i % n] += v;
                    }
                    accumulate(&mut adj, *x, g);
                    accumulate(&mut adj, *b, gb);
                }
                Op::MulRow { x, s } => {
                    let sd = self.value(*s).data();
                    let xd = self.value(*x).data();
                    let n = sd.len();
                    let mut gs = vec![0.0; n];
                    let mut gx = vec![0.0; g.len()];
                    for (i, v) in g.iter().enumerate() {
                        gs[i % n] += v * xd[i];
                        gx[i] = v * sd[i % n];
                    }
                    accumulate(&mut adj, *x, gx);
                    accumulate(&mut adj, *s, gs);
                }
                Op::ChannelAffine { x, s, b } => {
                    let tx = self.value(*x);
                    let (c, hw) = (tx.shape()[1], tx.shape()[2] * tx.shape()[3]);
                    let (xd, sd) = (tx.data(), self.value(*s).data());
                    let mut gs = vec![0.0; c];
                    let mut gb = vec![0.0; c];
                    let mut gx = vec![0.0; g.len()];
                    for (i, v) in g.iter().enumerate() {
                        let ch = (i / hw) % c;
                        gs[ch] += v * xd[i];
                        gb[ch] += v;
                        gx[i] = v * sd[ch];
                    }
                    accumulate(&mut adj, *x, gx);
                    accumulate(&mut adj, *s, gs);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Act { x, kind } => {
                    let xd = self.value(*x).data();
                    let yd = node.value.data();
                    let gx = g
                        .iter()
                        .zip(xd.iter().zip(yd))
                        .map(|(gv, (&xv, &yv))| {
                            gv * match kind {
                                Activation::Tanh => 1.0 - yv * yv,
                                Activation::Relu => {
                                    if xv > 0.0 {
                                        1.0
                                    } else {
                                        0.0
                                    }
                                }
                                Activation::Softplus => sigmoid(xv),
                            }
                        })
                        .collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::Conv3x3 { x, w, b } => {
                    let (tx, tw) = (self.value(*x), self.value(*w));
                    let (n, c, h, wd) = (tx.shape()[0], tx.shape()[1], tx.shape()[2], tx.shape()[3]);
                    let o = tw.shape()[0];
                    let (xd, wdat) = (tx.data(), tw.data());
                    let mut gx = vec![0.0; xd.len()];
                    let mut gw = vec![0.0; wdat.len()];
                    let mut gb = vec![0.0; o];
                    for img in 0..n {
                        for oc in 0..o {
                            for y in 0..h {
                                for xx in 0..wd {
                                    let gv = g[((img * o + oc) * h + y) * wd + xx];
                                    gb[oc] += gv;
                                    for ic in 0..c {
                                        for ky in 0..3 {
                                            let iy = y as isize + ky as isize - 1;
                                            if iy < 0 || iy >= h as isize {
                                                continue;
                                            }
                                            for kx in 0..3 {
                                                let ix = xx as isize + kx as isize - 1;
                                                if ix < 0 || ix >= wd as isize {
                                                    continue;
                                                }
                                                let xi = ((img * c + ic) * h + iy as usize) * wd
                                                    + ix as usize;
                                                let wi = ((oc * c + ic) * 3 + ky) * 3 + kx;
                                                gw[wi] += gv * xd[xi];
                                                gx[xi] += gv * wdat[wi];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    accumulate(&mut adj, *x, gx);
                    accumulate(&mut adj, *w, gw);
                    accumulate(&mut adj, *b, gb);
                }
                Op::GlobalAvgPool { x } => {
                    let tx = self.value(*x);
                    let hw = tx.shape()[2] * tx.shape()[3];
                    let gx = (0..tx.len()).map(|i| g[i / hw] / hw as f64).collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::SoftmaxCrossEntropy { logits, targets } => {
                    let tz = self.value(*logits);
                    let c = tz.shape()[1];
                    let scale = g[0] / targets.len() as f64;
                    let mut gz = vec![0.0; tz.len()];
                    for (i, &t) in targets.iter().enumerate() {
                        let row = tz.row(i);
                        let lse = log_sum_exp(row);
                        for j in 0..c {
                            let p = (row[j] - lse).exp();
                            gz[i * c + j] = scale * (p - if j == t { 1.0 } else { 0.0 });
                        }
                    }
                    accumulate(&mut adj, *logits, gz);
                }
                Op::MeanSquaredError { pred, target } => {
                    let pd = self.value(*pred).data();
                    let scale = 2.0 * g[0] / pd.len() as f64;
                    let gp = pd.iter().zip(target).map(|(p, t)| scale * (p - t)).collect();
                    accumulate(&mut adj, *pred, gp);
                }
                Op::HalfWeightedSquares { x, diag } => {
                    let xd = self.value(*x).data();
                    let gx = xd.iter().zip(diag).map(|(v, d)| g[0] * d * v).collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::Scale { x, factor } => {
                    let gx = g.iter().map(|v| v * factor).collect();
                    accumulate(&mut adj, *x, gx);
                }
            }
        }
        if let Some(i) = grad.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow(format!("non-finite gradient at index {i}")));
        }
        Ok(())
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut adj[v.0] {
        Some(existing) => {
            for (e, x) in existing.iter_mut().zip(g) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum = row.iter().fold(0.0, |acc, v| acc + (v - max).exp());
    max + sum.ln()
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Constant => "constant",
        Op::Param { .. } => "parameter",
        Op::MatMul { .. } => "matmul",
        Op::AddRow { .. } => "add_row",
        Op::MulRow { .. } => "mul_row",
        Op::ChannelAffine { .. } => "channel_affine",
        Op::Act { .. } => "activation",
        Op::Conv3x3 { .. } => "conv3x3",
        Op::GlobalAvgPool { .. } => "global_avg_pool",
        Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
        Op::MeanSquaredError { .. } => "mean_squared_error",
        Op::HalfWeightedSquares { .. } => "half_weighted_squares",
        Op::Scale { .. } => "scale",
    }
}

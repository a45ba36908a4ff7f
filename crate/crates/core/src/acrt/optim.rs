use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    SgdMomentum,
    AdamLite,
}

impl std::str::FromStr for OptimizerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "sgd-momentum" | "sgd" => Ok(OptimizerKind::SgdMomentum),
            "adam-lite" | "adam" => Ok(OptimizerKind::AdamLite),
            other => Err(crate::Error::Validation(format!("unknown optimizer `{other}` (sgd-momentum | adam-lite)"))),
        }
    }
}

/// Optimizer state. Parameters are snapped to f32 after every step.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    momentum: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, momentum: f64, k: usize) -> Self {
        Optimizer { kind, lr, momentum, m: vec![0.0; k], v: vec![0.0; k], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        match self.kind {
            OptimizerKind::SgdMomentum => {
                for ((w, g), m) in params.iter_mut().zip(grad).zip(&mut self.m) {
                    *m = self.momentum * *m + g;
                    *w -= self.lr * *m;
                }
            }
            OptimizerKind::AdamLite => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                let c1 = 1.0 - B1.powi(self.t);
                let c2 = 1.0 - B2.powi(self.t);
                for (((w, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    *m = B1 * *m + (1.0 - B1) * g;
                    *v = B2 * *v + (1.0 - B2) * g * g;
                    *w -= self.lr * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
                }
            }
        }
        params.iter_mut().for_each(|w| *w = f64::from(*w as f32));
    }
}

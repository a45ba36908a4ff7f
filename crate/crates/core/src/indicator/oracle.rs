//! Brute-force search for the worst corruption, used as ground truth on
//! tiny subspaces.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::corruption::{perturb, sample_feasible, CorruptionConstraint, CorruptionVector, Provenance};
use crate::engine::{eval_loss, Model};
use crate::error::{Error, Result};
use crate::norms::lp_norm;
use crate::params::FlatParams;
use crate::rng::RngState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// Angular grid over every support, then local refinement. Subspaces of at most 3 coordinates.
    Grid { resolution: usize },
    /// Best of `samples` random feasible points.
    Sampling { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub max_delta: f64,
    pub best: CorruptionVector,
    pub evaluations: usize,
    /// Angular grid spacing (grid mode) or zero (sampling mode).
    pub resolution: f64,
    pub mode: OracleMode,
}

struct Search<'a> {
    model: &'a dyn Model,
    base_values: &'a [f64],
    data: &'a Batch,
    base_loss: f64,
    c: &'a CorruptionConstraint,
    evaluations: usize,
}

impl Search<'_> {
    fn delta(&mut self, indices: &[usize], u: &[f64]) -> Result<(f64, CorruptionVector)> {
        let norm = lp_norm(u, self.c.p);
        let values: Vec<f64> = u.iter().map(|x| self.c.epsilon * x / norm).collect();
        let (indices, values): (Vec<usize>, Vec<f64>) =
            indices.iter().zip(values).filter(|(_, v)| *v != 0.0).map(|(&i, v)| (i, v)).unzip();
        let a = CorruptionVector { indices, values, provenance: Provenance::Oracle, linear_value: 0.0 };
        self.evaluations += 1;
        let d = eval_loss(self.model, &perturb(self.base_values, &a)?, self.data)? - self.base_loss;
        Ok((d, a))
    }
}

fn direction(angles: &[f64]) -> Vec<f64> {
    match *angles {
        [] => vec![1.0],
        [t] => vec![t.cos(), t.sin()],
        [t, f] => vec![f.sin() * t.cos(), f.sin() * t.sin(), f.cos()],
        _ => unreachable!("at most three coordinates"),
    }
}

pub fn brute_force_indicator(
    model: &dyn Model,
    params: &FlatParams,
    data: &Batch,
    c: &CorruptionConstraint,
    mode: OracleMode,
) -> Result<OracleResult> {
    if let Some(&last) = c.mask.last() {
        if last >= params.len() {
            return Err(Error::incompatible(format!("mask index {last} out of range for {} parameters", params.len())));
        }
    }
    let base_loss = eval_loss(model, params.values(), data)?;
    let mut s = Search { model, base_values: params.values(), data, base_loss, c, evaluations: 0 };
    let mut best: Option<(f64, CorruptionVector)> = None;
    let keep = |cand: (f64, CorruptionVector), best: &mut Option<(f64, CorruptionVector)>| {
        if best.as_ref().is_none_or(|b| cand.0 > b.0) {
            *best = Some(cand);
        }
    };
    let resolution = match mode {
        OracleMode::Sampling { samples, seed } => {
            if samples == 0 {
                return Err(Error::validation("sampling oracle needs at least one sample"));
            }
            let mut rng = RngState::new(seed);
            for _ in 0..samples {
                let a = sample_feasible(c, &mut rng);
                let (idx, vals) = (a.indices.clone(), a.values.clone());
                keep(s.delta(&idx, &vals)?, &mut best);
            }
            0.0
        }
        OracleMode::Grid { resolution } => {
            let k_sub = c.mask.len();
            if k_sub > 3 {
                return Err(Error::Mode(format!("grid oracle handles at most 3 coordinates, subspace has {k_sub}")));
            }
            if resolution < 4 {
                return Err(Error::validation("grid resolution must be at least 4"));
            }
            let m = c.n;
            let step = TAU / resolution as f64;
            for bits in 0u32..(1 << k_sub) {
                if bits.count_ones() as usize != m {
                    continue;
                }
                let support: Vec<usize> = (0..k_sub).filter(|j| bits & (1 << j) != 0).map(|j| c.mask[j]).collect();
                let grid: Vec<Vec<f64>> = match m {
                    1 => vec![vec![]],
                    2 => (0..resolution).map(|i| vec![i as f64 * step]).collect(),
                    _ => {
                        let rows = resolution / 2 + 1;
                        (0..resolution)
                            .flat_map(|i| (0..rows).map(move |j| vec![i as f64 * step, PI * j as f64 / (rows - 1) as f64]))
                            .collect()
                    }
                };
                if m == 1 {
                    keep(s.delta(&support, &[1.0])?, &mut best);
                    keep(s.delta(&support, &[-1.0])?, &mut best);
                    continue;
                }
                let mut local_best = (f64::NEG_INFINITY, grid[0].clone());
                for angles in grid {
                    let (d, _) = s.delta(&support, &direction(&angles))?;
                    if d > local_best.0 {
                        local_best = (d, angles);
                    }
                }
                // Compass search from the best grid node, in Cartesian coordinates so
                // that edges of nonsmooth spheres are followed.
                let (mut val, angles) = local_best;
                let mut at = direction(&angles);
                let mut h = step;
                while h > 1e-13 {
                    let mut moved = false;
                    for axis in 0..at.len() {
                        for sign in [1.0, -1.0] {
                            let mut trial = at.clone();
                            trial[axis] += sign * h;
                            let (d, _) = s.delta(&support, &trial)?;
                            if d > val {
                                val = d;
                                at = trial;
                                moved = true;
                            }
                        }
                    }
                    if !moved {
                        h *= 0.5;
                    }
                }
                keep(s.delta(&support, &at)?, &mut best);
            }
            step
        }
    };
    let (max_delta, best) = best.expect("at least one candidate");
    Ok(OracleResult { max_delta, best, evaluations: s.evaluations, resolution, mode })
}

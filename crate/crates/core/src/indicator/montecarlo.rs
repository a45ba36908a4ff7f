use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::corruption::{perturb, random_corruption, CorruptionConstraint};
use crate::engine::{eval_loss, Model};
use crate::error::{Error, Result};
use crate::params::FlatParams;
use crate::rng::RngState;

/// Quantile levels reported for `|delta L|`.
pub const MC_PROBABILITIES: [f64; 3] = [0.9, 0.95, 0.995];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileAbs {
    pub probability: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub trials: usize,
    pub mean_delta: f64,
    /// Standard error of `mean_delta` (over antithetic pair means when paired).
    pub std_error: f64,
    pub quantile_abs: Vec<QuantileAbs>,
    pub max_abs: f64,
}

impl McSummary {
    pub fn from_deltas(deltas: &[f64], antithetic: bool) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::validation("need at least one trial"));
        }
        let n = deltas.len() as f64;
        let mean_delta = deltas.iter().sum::<f64>() / n;
        let units: Vec<f64> = if antithetic {
            deltas.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
        } else {
            deltas.to_vec()
        };
        let std_error = if units.len() < 2 {
            0.0
        } else {
            let m = units.iter().sum::<f64>() / units.len() as f64;
            let var = units.iter().map(|u| (u - m) * (u - m)).sum::<f64>() / (units.len() - 1) as f64;
            (var / units.len() as f64).sqrt()
        };
        let mut abs: Vec<f64> = deltas.iter().map(|d| d.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let quantile_abs = MC_PROBABILITIES
            .iter()
            .map(|&p| {
                // Nearest rank.
                let rank = ((p * n).ceil() as usize).clamp(1, abs.len());
                QuantileAbs { probability: p, value: abs[rank - 1] }
            })
            .collect();
        Ok(McSummary { trials: deltas.len(), mean_delta, std_error, quantile_abs, max_abs: abs[abs.len() - 1] })
    }

    /// `alpha(p)`, the `p`-quantile of `|delta L|`.
    pub fn alpha(&self, probability: f64) -> Option<f64> {
        self.quantile_abs.iter().find(|q| q.probability == probability).map(|q| q.value)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McOptions {
    /// Worker threads; results do not depend on this.
    pub jobs: usize,
    /// Evaluate each draw `a` together with `-a`.
    pub antithetic: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { jobs: 1, antithetic: false }
    }
}

/// Per-trial `L(w + a) - L(w)` for random corruptions, in trial order.
/// Each draw gets its own stream seeded from `rng`, consumed sequentially.
pub fn random_deltas(
    model: &dyn Model,
    params: &FlatParams,
    data: &Batch,
    c: &CorruptionConstraint,
    trials: usize,
    rng: &mut RngState,
    opts: McOptions,
) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::validation("trials must be at least 1"));
    }
    let base = eval_loss(model, params.values(), data)?;
    let draws = if opts.antithetic { trials.div_ceil(2) } else { trials };
    let seeds: Vec<u64> = (0..draws).map(|_| rng.fork_seed()).collect();
    let one = |seed: &u64| -> Result<Vec<f64>> {
        let a = random_corruption(c, &mut RngState::new(*seed))?;
        let mut out = vec![eval_loss(model, &perturb(params.values(), &a)?, data)? - base];
        if opts.antithetic {
            out.push(eval_loss(model, &perturb(params.values(), &a.negated())?, data)? - base);
        }
        Ok(out)
    };
    let per_draw: Vec<Vec<f64>> = if opts.jobs <= 1 {
        seeds.iter().map(one).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::validation(format!("cannot start worker pool: {e}")))?;
        pool.install(|| seeds.par_iter().map(one).collect::<Result<_>>())?
    };
    let mut deltas: Vec<f64> = per_draw.into_iter().flatten().collect();
    deltas.truncate(trials);
    Ok(deltas)
}

pub fn estimate_indicator_montecarlo(
    model: &dyn Model,
    params: &FlatParams,
    data: &Batch,
    c: &CorruptionConstraint,
    trials: usize,
    rng: &mut RngState,
) -> Result<McSummary> {
    estimate_indicator_montecarlo_with(model, params, data, c, trials, rng, McOptions::default())
}

pub fn estimate_indicator_montecarlo_with(
    model: &dyn Model,
    params: &FlatParams,
    data: &Batch,
    c: &CorruptionConstraint,
    trials: usize,
    rng: &mut RngState,
    opts: McOptions,
) -> Result<McSummary> {
    let deltas = random_deltas(model, params, data, c, trials, rng, opts)?;
    McSummary::from_deltas(&deltas, opts.antithetic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{probe_batch, QuadraticProbe};
    use crate::norms::NormOrder;

    fn probe(k: usize) -> (QuadraticProbe, FlatParams) {
        let w: Vec<f64> = (0..k).map(|i| 1.0 + i as f64 * 0.5).collect();
        (QuadraticProbe::isotropic(k), FlatParams::ungrouped(w).unwrap())
    }

    #[test]
    fn single_trial_quantiles_collapse() {
        let (m, w) = probe(3);
        let c = CorruptionConstraint::full(NormOrder::Finite(2.0), 0.1, 3, 3).unwrap();
        let s = estimate_indicator_montecarlo(&m, &w, &probe_batch(), &c, 1, &mut RngState::new(4)).unwrap();
        assert_eq!(s.trials, 1);
        let v = s.mean_delta.abs();
        assert!(s.quantile_abs.iter().all(|q| q.value == v));
        assert_eq!(s.max_abs, v);
    }

    #[test]
    fn quantiles_are_ordered_nearest_rank() {
        let deltas: Vec<f64> = (1..=1000).map(|i| -(i as f64)).collect();
        let s = McSummary::from_deltas(&deltas, false).unwrap();
        assert_eq!(s.alpha(0.9), Some(900.0));
        assert_eq!(s.alpha(0.95), Some(950.0));
        assert_eq!(s.alpha(0.995), Some(995.0));
        assert_eq!(s.max_abs, 1000.0);
        assert!(McSummary::from_deltas(&[], false).is_err());
    }

    #[test]
    fn jobs_do_not_change_results() {
        let (m, w) = probe(20);
        let c = CorruptionConstraint::full(NormOrder::Finite(2.0), 0.05, 20, 20).unwrap();
        let run = |jobs, antithetic| {
            random_deltas(&m, &w, &probe_batch(), &c, 101, &mut RngState::new(9), McOptions { jobs, antithetic }).unwrap()
        };
        assert_eq!(run(1, false), run(4, false));
        assert_eq!(run(1, true), run(3, true));
        assert_eq!(run(1, true).len(), 101);
    }

    #[test]
    fn antithetic_pairs_cancel_linear_term_on_quadratic() {
        // delta(a) + delta(-a) = ||a||^2 = epsilon^2 exactly for 0.5 ||w||^2.
        let (m, w) = probe(6);
        let c = CorruptionConstraint::full(NormOrder::Finite(2.0), 0.1, 6, 6).unwrap();
        let d = random_deltas(&m, &w, &probe_batch(), &c, 200, &mut RngState::new(2), McOptions { jobs: 1, antithetic: true })
            .unwrap();
        for pair in d.chunks(2) {
            assert!((pair[0] + pair[1] - 0.01).abs() < 1e-12);
        }
        let s = McSummary::from_deltas(&d, true).unwrap();
        assert!((s.mean_delta - 0.005).abs() < 1e-12);
    }

    #[test]
    fn zero_trials_rejected() {
        let (m, w) = probe(2);
        let c = CorruptionConstraint::full(NormOrder::Finite(2.0), 0.1, 2, 2).unwrap();
        assert!(estimate_indicator_montecarlo(&m, &w, &probe_batch(), &c, 0, &mut RngState::new(1)).is_err());
    }
}

use super::select::select_top_n;
use super::{CorruptionConstraint, CorruptionVector, Provenance};
use crate::error::{Error, Result};
use crate::norms::NormOrder;
use crate::params::FlatParams;
use crate::rng::RngState;

/// Maximizer of `a . v` where `v` is given only on `indices` (sorted, distinct).
pub fn solve_sparse(
    indices: &[usize],
    values: &[f64],
    p: NormOrder,
    epsilon: f64,
    n: usize,
    provenance: Provenance,
) -> Result<CorruptionVector> {
    if indices.len() != values.len() {
        return Err(Error::incompatible(format!(
            "{} indices but {} values",
            indices.len(),
            values.len()
        )));
    }
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow(format!("direction entry {} is not finite", indices[bad])));
    }
    let (picked, _) = select_top_n(values, n)?;
    let h: Vec<(usize, f64)> = picked
        .into_iter()
        .map(|pos| (indices[pos], values[pos]))
        .filter(|&(_, v)| v != 0.0)
        .collect();
    if h.is_empty() {
        return Err(Error::DegenerateDirection { n });
    }
    let weights = match p {
        NormOrder::Infinity => h.iter().map(|&(_, v)| epsilon * v.signum()).collect(),
        NormOrder::Finite(1.0) => {
            // Largest magnitude, lowest index on ties.
            let best = h.iter().enumerate().fold(0, |b, (j, &(_, v))| if v.abs() > h[b].1.abs() { j } else { b });
            h.iter()
                .enumerate()
                .map(|(j, &(_, v))| if j == best { epsilon * v.signum() } else { 0.0 })
                .collect()
        }
        NormOrder::Finite(2.0) => {
            let norm = crate::norms::l2_norm(&h.iter().map(|&(_, v)| v).collect::<Vec<_>>());
            h.iter().map(|&(_, v)| epsilon * v / norm).collect()
        }
        NormOrder::Finite(p) => general_p_weights(&h, p, epsilon),
    };
    let mut out_idx = Vec::with_capacity(h.len());
    let mut out_val = Vec::with_capacity(h.len());
    let mut linear = 0.0;
    for (&(i, v), a) in h.iter().zip(weights) {
        if a != 0.0 {
            out_idx.push(i);
            out_val.push(a);
            linear += a * v;
        }
    }
    Ok(CorruptionVector { indices: out_idx, values: out_val, provenance, linear_value: linear })
}

/// `epsilon * sgn(h) |h|^(1/(p-1)) / || |h|^(1/(p-1)) ||_p`, normalized by `max |h|`.
pub(crate) fn general_p_weights(h: &[(usize, f64)], p: f64, epsilon: f64) -> Vec<f64> {
    let max = h.iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
    let e = 1.0 / (p - 1.0);
    let t: Vec<f64> = h.iter().map(|&(_, v)| (v.abs() / max).powf(e)).collect();
    let norm = t.iter().fold(0.0, |acc, x| acc + x.powf(p)).powf(1.0 / p);
    h.iter().zip(&t).map(|(&(_, v), x)| epsilon * v.signum() * x / norm).collect()
}

/// Maximizer of `a . v` over the constraint set, with `v` dense over all parameters.
pub fn solve_constrained_max(v: &[f64], c: &CorruptionConstraint) -> Result<CorruptionVector> {
    solve_with(v, c, Provenance::Oracle)
}

fn solve_with(v: &[f64], c: &CorruptionConstraint, provenance: Provenance) -> Result<CorruptionVector> {
    if let Some(&last) = c.mask.last() {
        if last >= v.len() {
            return Err(Error::incompatible(format!(
                "mask index {last} out of range for {} parameters",
                v.len()
            )));
        }
    }
    let gathered: Vec<f64> = c.mask.iter().map(|&i| v[i]).collect();
    solve_sparse(&c.mask, &gathered, c.p, c.epsilon, c.n, provenance)
}

/// Random corruption: the maximizer against a standard Gaussian direction on the mask.
pub fn random_corruption(c: &CorruptionConstraint, rng: &mut RngState) -> Result<CorruptionVector> {
    loop {
        let r = rng.gaussian_vec(c.mask.len());
        match solve_sparse(&c.mask, &r, c.p, c.epsilon, c.n, Provenance::Random) {
            Err(Error::DegenerateDirection { .. }) => continue,
            other => return other,
        }
    }
}

/// Gradient-based corruption: the maximizer against the loss gradient.
pub fn gradient_corruption(grad: &[f64], c: &CorruptionConstraint) -> Result<CorruptionVector> {
    solve_with(grad, c, Provenance::Gradient)
}

pub(crate) fn perturb(values: &[f64], a: &CorruptionVector) -> Result<Vec<f64>> {
    let mut out = values.to_vec();
    for (&i, &d) in a.indices.iter().zip(&a.values) {
        let slot = out.get_mut(i).ok_or_else(|| {
            Error::validation(format!("corruption index {i} out of range for {} parameters", values.len()))
        })?;
        *slot += d;
        if !slot.is_finite() {
            return Err(Error::NumericOverflow(format!("parameter {i} is not finite after corruption")));
        }
    }
    Ok(out)
}

/// `params + a`; the input is left untouched.
pub fn apply_corruption(params: &FlatParams, a: &CorruptionVector) -> Result<FlatParams> {
    params.with_values(perturb(params.values(), a)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::lp_norm;
    use proptest::prelude::*;

    fn full(p: NormOrder, eps: f64, n: usize, k: usize) -> CorruptionConstraint {
        CorruptionConstraint::full(p, eps, n, k).unwrap()
    }

    #[test]
    fn infinity_norm_example() {
        let a = solve_constrained_max(&[3.0, -1.0, 4.0], &full(NormOrder::Infinity, 0.1, 2, 3)).unwrap();
        assert_eq!(a.to_dense(3), vec![0.1, 0.0, 0.1]);
        assert!((a.linear_value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn l2_example() {
        let a = solve_constrained_max(&[3.0, 4.0], &full(NormOrder::Finite(2.0), 1.0, 2, 2)).unwrap();
        assert!((a.values[0] - 0.6).abs() < 1e-12 && (a.values[1] - 0.8).abs() < 1e-12);
        assert!((a.linear_value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn l1_puts_all_mass_on_largest() {
        let a = solve_constrained_max(&[1.0, -5.0, 2.0], &full(NormOrder::Finite(1.0), 0.5, 3, 3)).unwrap();
        assert_eq!(a.indices, vec![1]);
        assert_eq!(a.values, vec![-0.5]);
        let tie = solve_constrained_max(&[2.0, -2.0], &full(NormOrder::Finite(1.0), 1.0, 2, 2)).unwrap();
        assert_eq!(tie.indices, vec![0]);
    }

    #[test]
    fn zero_direction_is_degenerate() {
        let e = solve_constrained_max(&[0.0, 0.0, 1.0], &CorruptionConstraint::new(NormOrder::Infinity, 1.0, 2, vec![0, 1]).unwrap());
        assert!(matches!(e, Err(Error::DegenerateDirection { n: 2 })));
    }

    #[test]
    fn zeros_inside_support_are_dropped() {
        let a = solve_constrained_max(&[0.0, 2.0, 0.0], &full(NormOrder::Infinity, 1.0, 2, 3)).unwrap();
        assert_eq!(a.indices, vec![1]);
        assert_eq!(a.norm(NormOrder::Infinity), 1.0);
    }

    #[test]
    fn apply_example_and_negation() {
        let params = FlatParams::ungrouped(vec![1.0, 2.0, 3.0]).unwrap();
        let a = CorruptionVector { indices: vec![2], values: vec![0.1], provenance: Provenance::Oracle, linear_value: 0.0 };
        let once = apply_corruption(&params, &a).unwrap();
        assert_eq!(once.values(), &[1.0, 2.0, 3.1]);
        assert_eq!(params.values(), &[1.0, 2.0, 3.0]);
        let back = apply_corruption(&once, &a.negated()).unwrap();
        assert_eq!(back.values(), params.values());
        let oob = CorruptionVector { indices: vec![3], ..a };
        assert!(apply_corruption(&params, &oob).is_err());
    }

    #[test]
    fn mask_bounds_checked() {
        let c = CorruptionConstraint::new(NormOrder::Infinity, 1.0, 1, vec![5]).unwrap();
        assert!(matches!(solve_constrained_max(&[1.0; 3], &c), Err(Error::Incompatible(_))));
        assert!(CorruptionConstraint::new(NormOrder::Infinity, 1.0, 2, vec![1]).is_err());
        assert!(CorruptionConstraint::new(NormOrder::Infinity, 0.0, 1, vec![1]).is_err());
        assert!(CorruptionConstraint::new(NormOrder::Infinity, 1.0, 1, vec![2, 1]).is_err());
    }

    #[test]
    fn random_corruption_is_seeded_and_feasible() {
        let c = CorruptionConstraint::new(NormOrder::Finite(3.0), 0.2, 4, vec![1, 3, 5, 7, 9, 11]).unwrap();
        let a = random_corruption(&c, &mut RngState::new(5)).unwrap();
        let b = random_corruption(&c, &mut RngState::new(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.provenance, Provenance::Random);
        assert!(a.nnz() <= 4 && a.indices.iter().all(|i| c.mask.contains(i)));
        assert!((a.norm(c.p) - 0.2).abs() < 1e-12);
    }

    fn direction() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![3 => -10.0f64..10.0, 1 => Just(0.0)], 1..24)
    }

    fn order() -> impl Strategy<Value = NormOrder> {
        prop_oneof![
            Just(NormOrder::Finite(1.0)),
            Just(NormOrder::Finite(2.0)),
            Just(NormOrder::Infinity),
            (1.05f64..12.0).prop_map(NormOrder::Finite),
        ]
    }

    proptest! {
        #[test]
        fn solution_is_feasible_and_attains_dual_norm(v in direction(), p in order(), eps in 1e-4f64..10.0, frac in 0.0f64..1.0) {
            let k = v.len();
            let n = 1 + ((k - 1) as f64 * frac) as usize;
            let c = full(p, eps, n, k);
            let h = super::super::top_n(&v, n).unwrap();
            match solve_constrained_max(&v, &c) {
                Err(Error::DegenerateDirection { .. }) => prop_assert!(h.iter().all(|&x| x == 0.0)),
                Err(e) => prop_assert!(false, "{e}"),
                Ok(a) => {
                    prop_assert!(a.nnz() <= n);
                    prop_assert!(a.indices.windows(2).all(|w| w[0] < w[1]));
                    prop_assert!((a.norm(p) - eps).abs() <= 1e-9 * eps.max(1.0));
                    let target = eps * lp_norm(&h, p.dual());
                    prop_assert!((a.linear_value - target).abs() <= 1e-9 * target.max(1.0));
                    prop_assert!((a.dot_dense(&v) - a.linear_value).abs() <= 1e-12 * target.max(1.0));
                }
            }
        }

        #[test]
        fn general_formula_matches_l2_path(v in prop::collection::vec(-10.0f64..10.0, 1..24), eps in 1e-3f64..5.0) {
            prop_assume!(v.iter().any(|&x| x != 0.0));
            let h: Vec<(usize, f64)> = v.iter().copied().enumerate().filter(|&(_, x)| x != 0.0).collect();
            let general = general_p_weights(&h, 2.0, eps);
            let direct = solve_constrained_max(&v, &full(NormOrder::Finite(2.0), eps, v.len(), v.len())).unwrap();
            prop_assert_eq!(general.len(), direct.values.len());
            for (g, d) in general.iter().zip(&direct.values) {
                prop_assert!((g - d).abs() <= 1e-9);
            }
        }

        #[test]
        fn large_p_approaches_sign_solution(v in prop::collection::vec(0.5f64..10.0, 1..12), eps in 0.01f64..2.0) {
            let k = v.len();
            let big = solve_constrained_max(&v, &full(NormOrder::Finite(1e6), eps, k, k)).unwrap();
            let inf = solve_constrained_max(&v, &full(NormOrder::Infinity, eps, k, k)).unwrap();
            for (a, b) in big.values.iter().zip(&inf.values) {
                prop_assert!((a - b).abs() <= 1e-4 * eps);
            }
        }

        #[test]
        fn corruption_is_its_own_inverse_within_one_ulp(w in prop::collection::vec(-100.0f64..100.0, 1..16), v in prop::collection::vec(-1.0f64..1.0, 1..16)) {
            let k = w.len().min(v.len());
            prop_assume!(v[..k].iter().any(|&x| x != 0.0));
            let params = FlatParams::ungrouped(w[..k].to_vec()).unwrap();
            let a = solve_constrained_max(&v[..k], &full(NormOrder::Infinity, 0.05, k, k)).unwrap();
            let back = apply_corruption(&apply_corruption(&params, &a).unwrap(), &a.negated()).unwrap();
            for (x, y) in back.values().iter().zip(params.values()) {
                prop_assert!((x - y).abs() <= f64::EPSILON * y.abs().max(0.05) * 2.0);
            }
        }
    }
}

use super::{CorruptionConstraint, CorruptionVector, Provenance};
use crate::norms::lp_norm;
use crate::rng::RngState;

/// A random point of the constraint set: support size uniform in `[1, n]`,
/// support drawn uniformly from the mask, Gaussian entries rescaled onto
/// the `||.||_p = epsilon` surface. `linear_value` is left at zero.
pub fn sample_feasible(c: &CorruptionConstraint, rng: &mut RngState) -> CorruptionVector {
    let m = 1 + rng.below(c.n);
    let mut pool: Vec<usize> = (0..c.mask.len()).collect();
    for i in 0..m {
        let j = i + rng.below(pool.len() - i);
        pool.swap(i, j);
    }
    let mut picked: Vec<usize> = pool[..m].iter().map(|&j| c.mask[j]).collect();
    picked.sort_unstable();
    let values = loop {
        let raw = rng.gaussian_vec(m);
        let norm = lp_norm(&raw, c.p);
        if norm > 0.0 && raw.iter().all(|&x| x != 0.0) {
            break raw.into_iter().map(|x| c.epsilon * x / norm).collect::<Vec<_>>();
        }
    };
    CorruptionVector { indices: picked, values, provenance: Provenance::Oracle, linear_value: 0.0 }
}

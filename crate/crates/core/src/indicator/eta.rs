//! Distribution of `eta = |first coordinate|` of a uniform point on the unit
//! sphere in `R^k`: the normalized overlap between a random corruption and
//! the gradient.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad::gauss_kronrod;
use crate::rng::RngState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityValue {
    Finite(f64),
    /// The `k = 2` density diverges at `x = 1`.
    Unbounded,
}

impl DensityValue {
    pub fn value(self) -> f64 {
        match self {
            DensityValue::Finite(v) => v,
            DensityValue::Unbounded => f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaDistribution {
    k: usize,
}

impl EtaDistribution {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Domain(format!("eta needs k >= 2, got {k}")));
        }
        Ok(EtaDistribution { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `2 Gamma(k/2) / (sqrt(pi) Gamma((k-1)/2))`, through log-gamma.
    pub fn coefficient(&self) -> f64 {
        let k = self.k as f64;
        (std::f64::consts::LN_2 + ln_gamma(k / 2.0)
            - 0.5 * std::f64::consts::PI.ln()
            - ln_gamma((k - 1.0) / 2.0))
            .exp()
    }

    pub fn density(&self, x: f64) -> Result<DensityValue> {
        check_unit(x)?;
        let exponent = (self.k as f64 - 3.0) / 2.0;
        let base = (1.0 - x) * (1.0 + x);
        if base == 0.0 {
            return Ok(match self.k {
                2 => DensityValue::Unbounded,
                3 => DensityValue::Finite(self.coefficient()),
                _ => DensityValue::Finite(0.0),
            });
        }
        Ok(DensityValue::Finite(self.coefficient() * base.powf(exponent)))
    }

    /// `P(eta <= x)`. With `x = sin(theta)` the integrand becomes
    /// `C cos^(k-2)(theta)`, smooth on `[0, pi/2]` for every `k >= 2`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        if x == 0.0 {
            return Ok(0.0);
        }
        let c = self.coefficient();
        let power = (self.k - 2) as i32;
        let upper = x.asin();
        let r = gauss_kronrod(|t| t.cos().powi(power), 0.0, upper, 1e-15)?;
        Ok((c * r.value).clamp(0.0, 1.0))
    }

    /// `|r_1| / ||r||_2` for standard Gaussian `r` in `R^k`.
    pub fn sample(&self, trials: usize, rng: &mut RngState) -> Vec<f64> {
        (0..trials)
            .map(|_| {
                let first = rng.gaussian();
                let mut ss = first * first;
                for _ in 1..self.k {
                    let z = rng.gaussian();
                    ss += z * z;
                }
                if ss == 0.0 {
                    0.0
                } else {
                    (first.abs() / ss.sqrt()).min(1.0)
                }
            })
            .collect()
    }
}

fn check_unit(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("eta is supported on [0, 1], got {x}")));
    }
    Ok(())
}

pub fn eta_density(x: f64, k: usize) -> Result<DensityValue> {
    EtaDistribution::new(k)?.density(x)
}

pub fn eta_cdf(x: f64, k: usize) -> Result<f64> {
    EtaDistribution::new(k)?.cdf(x)
}

pub fn sample_eta(k: usize, trials: usize, rng: &mut RngState) -> Result<Vec<f64>> {
    Ok(EtaDistribution::new(k)?.sample(trials, rng))
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `samples` and `cdf`. Sorts `samples` in place.
pub fn ks_statistic<F: FnMut(f64) -> f64>(samples: &mut [f64], mut cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

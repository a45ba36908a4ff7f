//! One-dimensional quadrature: adaptive Gauss-Kronrod (7/15) and tanh-sinh.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights at the odd Kronrod nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive bisection with a 15-point Kronrod rule; stops when the summed
/// error estimate is below `tol` or the interval budget is spent.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration bounds must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    const MAX_INTERVALS: usize = 2000;
    let (v, e) = kronrod(&f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let total_err: f64 = pieces.iter().map(|p| p.3).sum();
        if total_err <= tol || pieces.len() >= MAX_INTERVALS {
            break;
        }
        let worst = pieces
            .iter()
            .enumerate()
            .fold(0, |w, (i, p)| if p.3 > pieces[w].3 { i } else { w });
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (vl, el) = kronrod(&f, lo, mid);
        let (vr, er) = kronrod(&f, mid, hi);
        evaluations += 30;
        pieces.push((lo, mid, vl, el));
        pieces.push((mid, hi, vr, er));
    }
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let value = pieces.iter().map(|p| p.2).sum();
    let error = pieces.iter().map(|p| p.3).sum();
    if !f64::is_finite(value) {
        return Err(Error::NumericOverflow("integrand produced a non-finite value".into()));
    }
    Ok(Integral { value, error, evaluations })
}

/// Double-exponential (tanh-sinh) rule on `[a, b]`. Tolerates integrable
/// endpoint singularities; endpoints themselves are never evaluated.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Integral> {
    use std::f64::consts::FRAC_PI_2;
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::Domain(format!("need finite a < b, got [{a}, {b}]")));
    }
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    // Node at t maps to c -/+ r * (1 - tanh(u)); `gap = 1 - tanh(u)` computed without cancellation.
    let node = |t: f64| {
        let u = FRAC_PI_2 * t.sinh();
        let gap = 2.0 / (1.0 + (2.0 * u).exp());
        let w = FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
        (gap, w)
    };
    let pair = |t: f64| -> f64 {
        let (gap, w) = node(t);
        if w == 0.0 || gap == 0.0 {
            return 0.0;
        }
        let lo = a + r * gap;
        let hi = b - r * gap;
        let mut s = 0.0;
        if lo > a {
            s += f(lo);
        }
        if hi < b {
            s += f(hi);
        }
        s * w
    };
    let t_max = 6.5;
    let mut h = 0.5;
    let mut sum = f(c) * FRAC_PI_2;
    let mut evaluations = 1;
    let mut t = h;
    while t <= t_max {
        sum += pair(t);
        evaluations += 2;
        t += h;
    }
    let mut estimate = r * h * sum;
    for _ in 0..12 {
        h *= 0.5;
        let mut t = h;
        while t <= t_max {
            sum += pair(t);
            evaluations += 2;
            t += 2.0 * h;
        }
        let next = r * h * sum;
        let err = (next - estimate).abs();
        estimate = next;
        if !estimate.is_finite() {
            return Err(Error::NumericOverflow("integrand produced a non-finite value".into()));
        }
        if err <= tol {
            return Ok(Integral { value: estimate, error: err, evaluations });
        }
    }
    Ok(Integral { value: estimate, error: f64::NAN, evaluations })
}

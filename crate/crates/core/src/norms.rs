//! Vector norms with f64 accumulation in a fixed order.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Order of an L_p norm, `p >= 1`, with `+inf` kept distinct.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormOrder {
    Finite(f64),
    Infinity,
}

impl NormOrder {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::Domain(format!("norm order must satisfy p >= 1, got {p}")));
        }
        Ok(if p.is_infinite() { NormOrder::Infinity } else { NormOrder::Finite(p) })
    }

    pub fn as_f64(self) -> f64 {
        match self {
            NormOrder::Finite(p) => p,
            NormOrder::Infinity => f64::INFINITY,
        }
    }

    /// The Hölder conjugate `q = p / (p - 1)`.
    pub fn dual(self) -> NormOrder {
        match self {
            NormOrder::Infinity => NormOrder::Finite(1.0),
            NormOrder::Finite(1.0) => NormOrder::Infinity,
            NormOrder::Finite(p) => NormOrder::Finite(p / (p - 1.0)),
        }
    }

    pub fn norm(self, v: &[f64]) -> f64 {
        lp_norm(v, self)
    }
}

impl std::str::FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(NormOrder::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::Domain(format!("cannot parse norm order `{s}`")))?;
                NormOrder::new(p)
            }
        }
    }
}

impl std::fmt::Display for NormOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormOrder::Finite(p) => write!(f, "{p}"),
            NormOrder::Infinity => f.write_str("inf"),
        }
    }
}

// JSON has no infinity, so +inf travels as the string "inf".
impl Serialize for NormOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormOrder::Finite(p) => s.serialize_f64(*p),
            NormOrder::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(p) => NormOrder::new(p),
            Raw::Str(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    lp_norm(v, NormOrder::Finite(2.0))
}

/// `||v||_p`, scaled by `max |v_i|` so large exponents neither overflow nor underflow.
pub fn lp_norm(v: &[f64], p: NormOrder) -> f64 {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    match p {
        NormOrder::Infinity => max,
        _ if max == 0.0 => 0.0,
        NormOrder::Finite(1.0) => v.iter().fold(0.0, |acc, x| acc + x.abs()),
        NormOrder::Finite(2.0) => {
            let s = v.iter().fold(0.0, |acc, x| {
                let r = x / max;
                acc + r * r
            });
            max * s.sqrt()
        }
        NormOrder::Finite(p) => {
            let s = v.iter().fold(0.0, |acc, x| acc + (x.abs() / max).powf(p));
            max * s.powf(1.0 / p)
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

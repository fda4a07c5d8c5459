//! Exact rational helpers shared by every module.
//!
//! Money, probabilities and linear-decay times are carried as [`Q`]
//! (arbitrary precision rationals). Quantities that only exist as a
//! logarithm (geometric break-even times) are carried as [`Real::Float`]
//! and compared with [`TOLERANCE`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Exact rational number.
pub type Q = BigRational;

/// Symmetric comparison tolerance for floating quantities.
pub const TOLERANCE: f64 = 1e-9;

/// Fractional digits kept when a rational has no terminating decimal form.
pub const MAX_FRACTION_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid number `{0}`")]
pub struct ParseNumError(pub String);

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `12`, `-0.05`, `1e-6`, `2.5E3` or `1/3` into an exact rational.
pub fn parse_decimal(s: &str) -> Result<Q, ParseNumError> {
    let err = || ParseNumError(s.to_string());
    let t = s.trim();
    if t.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = parse_decimal(n)?;
        let d = parse_decimal(d)?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(n / d);
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return Err(err());
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(if all.is_empty() { "0" } else { &all }).map_err(|_| err())?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Q::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Q::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        value = -value;
    }
    Ok(value)
}

/// Renders a rational as a plain decimal string (never scientific).
///
/// Terminating decimals are printed exactly with trailing zeros removed;
/// anything else is rounded half away from zero to
/// [`MAX_FRACTION_DIGITS`] places.
pub fn format_decimal(x: &Q) -> String {
    let neg = x.is_negative();
    let abs = x.abs();
    let denom = abs.denom().clone();
    let digits = terminating_digits(&denom).unwrap_or(MAX_FRACTION_DIGITS);
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = abs * Q::from_integer(scale.clone());
    // round half away from zero
    let half = ratio(1, 2);
    let rounded = (scaled + half).floor().to_integer();
    let (int_part, frac_part) = rounded.div_rem(&scale);
    let mut out = String::new();
    if neg && !rounded.is_zero() {
        out.push('-');
    }
    out.push_str(&int_part.to_string());
    if digits > 0 {
        let frac = format!("{:0>width$}", frac_part.to_string(), width = digits);
        let frac = frac.trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    }
    out
}

/// Number of decimal places needed for `1/denom`, if it terminates.
fn terminating_digits(denom: &BigInt) -> Option<usize> {
    let mut d = denom.clone();
    let (mut twos, mut fives) = (0usize, 0usize);
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while d.is_even() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    d.is_one().then_some(twos.max(fives))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        if x.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Converts a float to a rational, rounded to [`MAX_FRACTION_DIGITS`] places.
pub fn from_f64_rounded(x: f64) -> Q {
    let scale = 10f64.powi(MAX_FRACTION_DIGITS as i32);
    let n = (x * scale).round();
    let numer = BigInt::from_str(&format!("{n:.0}")).unwrap_or_default();
    Q::new(numer, num_traits::pow(BigInt::from(10), MAX_FRACTION_DIGITS))
}

pub fn is_integer(x: &Q) -> bool {
    x.is_integer()
}

pub fn floor_i64(x: &Q) -> i64 {
    x.floor().to_integer().to_i64().expect("floor fits in i64")
}

/// A real quantity that is exact whenever its family allows it.
#[derive(Debug, Clone)]
pub enum Real {
    Exact(Q),
    Float(f64),
}

impl Real {
    pub fn zero() -> Self {
        Real::Exact(Q::zero())
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Real::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Exact(x) => to_f64(x),
            Real::Float(f) => *f,
        }
    }

    pub fn as_exact(&self) -> Option<&Q> {
        match self {
            Real::Exact(x) => Some(x),
            Real::Float(_) => None,
        }
    }

    /// Floor, snapping floats that sit within tolerance of an integer.
    pub fn floor(&self) -> i64 {
        match self {
            Real::Exact(x) => floor_i64(x),
            Real::Float(f) => {
                let r = f.round();
                if (f - r).abs() <= TOLERANCE * r.abs().max(1.0) {
                    r as i64
                } else {
                    f.floor() as i64
                }
            }
        }
    }

    /// Exact comparison when both sides are exact, otherwise equality within
    /// a relative tolerance.
    pub fn cmp_tol(&self, other: &Real) -> Ordering {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => a.cmp(b),
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                if (a - b).abs() <= TOLERANCE * a.abs().max(b.abs()).max(1.0) {
                    Ordering::Equal
                } else if a < b {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
        }
    }

    pub fn add(&self, other: &Real) -> Real {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a + b),
            _ => Real::Float(self.to_f64() + other.to_f64()),
        }
    }

    pub fn sub(&self, other: &Real) -> Real {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a - b),
            _ => Real::Float(self.to_f64() - other.to_f64()),
        }
    }

    pub fn mul(&self, other: &Real) -> Real {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a * b),
            _ => Real::Float(self.to_f64() * other.to_f64()),
        }
    }
}

impl From<Q> for Real {
    fn from(x: Q) -> Self {
        Real::Exact(x)
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_tol(other) == Ordering::Equal
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(x) => f.write_str(&format_decimal(x)),
            Real::Float(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Serde adapter printing a rational as a decimal string.
pub mod decimal {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_decimal(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Str(String),
            Num(serde_json::Number),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Str(s) => s,
            Raw::Num(n) => n.to_string(),
        };
        parse_decimal(&text).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<Q>`.
pub mod decimal_vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[Q], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(format_decimal))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super::decimal")] Q);
        let v: Vec<Wrap> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|w| w.0).collect())
    }
}

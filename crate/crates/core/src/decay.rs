//! Value-decay functions `phi(t)`: the fraction of the contested value that
//! survives `t` completed attacks.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::num::{self, Real, Q, TOLERANCE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecayError {
    #[error("invalid decay function: {0}")]
    Invalid(String),
    #[error("time must be non-negative")]
    NegativeTime,
    #[error("table decay is only defined at integer times")]
    NonIntegerTime,
    #[error("{0} is outside the attained range of the decay function")]
    OutOfRange(String),
    #[error("{0} is skipped by the decay table")]
    Skipped(String),
    #[error("decay table never falls to {0}; extend the table")]
    TableTooShort(String),
    #[error("game never starts: attack cost must be below the transaction value")]
    GameNeverStarts,
    #[error("invalid game values: {0}")]
    InvalidValues(&'static str),
    #[error("no odd integer is <= {0}")]
    NoOddFloor(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecayFn {
    /// `(1 - delta)^t`
    Geometric { delta: Q },
    /// `max(1 - gamma * t, 0)`
    Linear { gamma: Q },
    /// Tabulated values at integer times; the last value holds beyond the end.
    Table { values: Vec<Q> },
}

impl DecayFn {
    pub fn linear(gamma: Q) -> Result<Self, DecayError> {
        let f = DecayFn::Linear { gamma };
        f.validate()?;
        Ok(f)
    }

    pub fn geometric(delta: Q) -> Result<Self, DecayError> {
        let f = DecayFn::Geometric { delta };
        f.validate()?;
        Ok(f)
    }

    pub fn table(values: Vec<Q>) -> Result<Self, DecayError> {
        let f = DecayFn::Table { values };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), DecayError> {
        let invalid = |m: &str| Err(DecayError::Invalid(m.to_string()));
        match self {
            DecayFn::Geometric { delta } => {
                if !delta.is_positive() || *delta >= Q::one() {
                    return invalid("geometric delta must lie in (0, 1)");
                }
            }
            DecayFn::Linear { gamma } => {
                if !gamma.is_positive() || *gamma > Q::one() {
                    return invalid("linear gamma must lie in (0, 1]");
                }
            }
            DecayFn::Table { values } => {
                if values.first() != Some(&Q::one()) {
                    return invalid("table must start at 1");
                }
                if values.iter().any(|v| v.is_negative()) {
                    return invalid("table values must be >= 0");
                }
                for w in values.windows(2) {
                    let ok = if w[0].is_zero() {
                        w[1].is_zero()
                    } else {
                        w[1] < w[0]
                    };
                    if !ok {
                        return invalid("table must strictly decrease until it reaches 0");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, DecayFn::Linear { .. })
    }

    /// `phi(t)` at an integer time. Exact for every family.
    pub fn phi_at(&self, t: u64) -> Q {
        match self {
            DecayFn::Geometric { delta } => num_traits::pow(Q::one() - delta, t as usize),
            DecayFn::Linear { gamma } => {
                let v = Q::one() - gamma * num::q(t as i64);
                if v.is_negative() {
                    Q::zero()
                } else {
                    v
                }
            }
            DecayFn::Table { values } => values
                .get(t as usize)
                .or(values.last())
                .cloned()
                .unwrap_or_else(Q::zero),
        }
    }

    /// `phi(t)` at a real time.
    pub fn eval(&self, t: &Real) -> Result<Real, DecayError> {
        if t.cmp_tol(&Real::zero()) == Ordering::Less {
            return Err(DecayError::NegativeTime);
        }
        if let Some(k) = integer_time(t) {
            if let Real::Exact(_) = t {
                return Ok(Real::Exact(self.phi_at(k)));
            }
            if matches!(self, DecayFn::Table { .. }) {
                return Ok(Real::Exact(self.phi_at(k)));
            }
        }
        match (self, t) {
            (DecayFn::Table { .. }, _) => Err(DecayError::NonIntegerTime),
            (DecayFn::Linear { gamma }, Real::Exact(x)) => {
                let v = Q::one() - gamma * x;
                Ok(Real::Exact(if v.is_negative() { Q::zero() } else { v }))
            }
            (DecayFn::Linear { gamma }, Real::Float(x)) => {
                Ok(Real::Float((1.0 - num::to_f64(gamma) * x).max(0.0)))
            }
            (DecayFn::Geometric { delta }, _) => Ok(Real::Float((1.0 - num::to_f64(delta)).powf(t.to_f64()))),
        }
    }

    /// Smallest `t` with `phi(t) = y`.
    pub fn inverse(&self, y: &Real) -> Result<Real, DecayError> {
        let out_of_range = || Err(DecayError::OutOfRange(y.to_string()));
        if y.cmp_tol(&Real::Exact(Q::one())) == Ordering::Greater
            || y.cmp_tol(&Real::zero()) == Ordering::Less
        {
            return out_of_range();
        }
        if y.cmp_tol(&Real::Exact(Q::one())) == Ordering::Equal {
            return Ok(Real::zero());
        }
        match self {
            DecayFn::Linear { gamma } => match y {
                Real::Exact(y) => Ok(Real::Exact((Q::one() - y) / gamma)),
                Real::Float(y) => Ok(Real::Float((1.0 - y.max(0.0)) / num::to_f64(gamma))),
            },
            DecayFn::Geometric { delta } => {
                if y.cmp_tol(&Real::zero()) != Ordering::Greater {
                    return out_of_range();
                }
                let t = y.to_f64().ln() / (1.0 - num::to_f64(delta)).ln();
                // exact integer hit, e.g. 0.81 = 0.9^2
                let k = t.round();
                if let Real::Exact(yq) = y {
                    if (t - k).abs() <= TOLERANCE * k.abs().max(1.0)
                        && k >= 0.0
                        && self.phi_at(k as u64) == *yq
                    {
                        return Ok(Real::Exact(num::q(k as i64)));
                    }
                }
                Ok(Real::Float(t))
            }
            DecayFn::Table { values } => values
                .iter()
                .position(|v| Real::Exact(v.clone()).cmp_tol(y) == Ordering::Equal)
                .map(|i| Real::Exact(num::q(i as i64)))
                .ok_or_else(|| DecayError::Skipped(y.to_string())),
        }
    }

    /// First integer time at which a table decay is at or below `y`.
    fn table_first_at_or_below(values: &[Q], y: &Q) -> Option<u64> {
        values.iter().position(|v| v <= y).map(|i| i as u64)
    }
}

fn integer_time(t: &Real) -> Option<u64> {
    match t {
        Real::Exact(x) if x.is_integer() => x.to_integer().to_u64(),
        Real::Exact(_) => None,
        Real::Float(f) => {
            let r = f.round();
            ((f - r).abs() <= TOLERANCE * r.abs().max(1.0) && r >= 0.0).then_some(r as u64)
        }
    }
}

impl fmt::Display for DecayFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecayFn::Geometric { delta } => write!(f, "geometric({})", num::format_decimal(delta)),
            DecayFn::Linear { gamma } => write!(f, "linear({})", num::format_decimal(gamma)),
            DecayFn::Table { values } => {
                let parts: Vec<String> = values.iter().map(num::format_decimal).collect();
                write!(f, "table({})", parts.join(","))
            }
        }
    }
}

impl FromStr for DecayFn {
    type Err = DecayError;

    /// Parses `linear(0.1)`, `geometric(0.05)` or `table(1,0.8,0.6)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DecayError::Invalid(format!("cannot parse `{s}`"));
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let args = inner
            .split(',')
            .map(|a| num::parse_decimal(a).map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        let single = || match args.as_slice() {
            [x] => Ok(x.clone()),
            _ => Err(bad()),
        };
        match s[..open].trim().to_ascii_lowercase().as_str() {
            "linear" => DecayFn::linear(single()?),
            "geometric" => DecayFn::geometric(single()?),
            "table" => DecayFn::table(args),
            _ => Err(bad()),
        }
    }
}

impl Serialize for DecayFn {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Defender's break-even time, absent when fighting always beats conceding.
#[derive(Debug, Clone, PartialEq)]
pub enum DefenderTime {
    Finite(Real),
    Unbounded,
}

impl DefenderTime {
    pub fn finite(&self) -> Option<&Real> {
        match self {
            DefenderTime::Finite(t) => Some(t),
            DefenderTime::Unbounded => None,
        }
    }
}

impl fmt::Display for DefenderTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DefenderTime::Finite(t) => t.fmt(f),
            DefenderTime::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for DefenderTime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakEvenTimes {
    pub t_attacker: Real,
    pub t_defender: DefenderTime,
}

/// Times at which quitting becomes weakly better than fighting:
/// `phi(T_A) v - c = 0` and `phi(T_D) v - c = -r`.
///
/// Table decays use the first integer time at or below the threshold, since
/// a step function rarely hits the threshold exactly.
pub fn break_even_times(v: &Q, c: &Q, r: &Q, decay: &DecayFn) -> Result<BreakEvenTimes, DecayError> {
    if !v.is_positive() {
        return Err(DecayError::InvalidValues("v must be > 0"));
    }
    if !c.is_positive() {
        return Err(DecayError::InvalidValues("c must be > 0"));
    }
    if !r.is_positive() {
        return Err(DecayError::InvalidValues("r must be > 0"));
    }
    if c >= v {
        return Err(DecayError::GameNeverStarts);
    }
    let y_a = c / v;
    let y_d = (c - r) / v;
    match decay {
        DecayFn::Table { values } => {
            let t_a = DecayFn::table_first_at_or_below(values, &y_a)
                .ok_or_else(|| DecayError::TableTooShort(num::format_decimal(&y_a)))?;
            let t_d = if y_d.is_negative() {
                None
            } else {
                DecayFn::table_first_at_or_below(values, &y_d)
            };
            Ok(BreakEvenTimes {
                t_attacker: Real::Exact(num::q(t_a as i64)),
                t_defender: t_d
                    .map(|t| DefenderTime::Finite(Real::Exact(num::q(t as i64))))
                    .unwrap_or(DefenderTime::Unbounded),
            })
        }
        _ => {
            let t_attacker = decay.inverse(&Real::Exact(y_a))?;
            let y_d = Real::Exact(y_d);
            let t_defender = match decay.inverse(&y_d) {
                Ok(t) => DefenderTime::Finite(t),
                Err(DecayError::OutOfRange(_)) => DefenderTime::Unbounded,
                Err(e) => return Err(e),
            };
            Ok(BreakEvenTimes {
                t_attacker,
                t_defender,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

/// Largest integer of the requested parity that is `<= x`.
pub fn parity_floor(x: &Real, parity: Parity) -> Result<i64, DecayError> {
    if x.cmp_tol(&Real::zero()) == Ordering::Less {
        return Err(DecayError::NegativeTime);
    }
    let f = x.floor();
    let matches = match parity {
        Parity::Even => f % 2 == 0,
        Parity::Odd => f % 2 != 0,
    };
    let out = if matches { f } else { f - 1 };
    if out < 0 {
        return Err(DecayError::NoOddFloor(x.to_string()));
    }
    Ok(out)
}

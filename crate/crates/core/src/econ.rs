//! Cost of a single majority double-spend attack under a rented-hashrate
//! market with free entry.

use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::num::{self, Q};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EconError {
    #[error("{0} must be strictly positive")]
    NonPositive(&'static str),
    #[error("price impact delta must lie in [0, 1]")]
    DeltaOutOfRange,
    #[error("escrow must be at least one block")]
    ZeroEscrow,
    #[error("beta must be non-negative")]
    NegativeBeta,
    #[error("majority required: beta must exceed 1 (got {0})")]
    MajorityRequired(String),
    #[error("market impact: {0}")]
    MarketImpact(String),
}

/// Fractional increase in the hashrate rental price when renting a multiple
/// of the honest hashpower.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarketImpactFn {
    Constant {
        #[serde(with = "num::decimal")]
        value: Q,
    },
    /// `kappa(beta) = slope * beta`
    Linear {
        #[serde(with = "num::decimal")]
        slope: Q,
    },
    /// Step-interpolated `(beta, kappa)` points.
    Table {
        #[serde(serialize_with = "serialize_points")]
        points: Vec<(Q, Q)>,
    },
}

fn serialize_points<S: serde::Serializer>(points: &[(Q, Q)], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(
        points
            .iter()
            .map(|(b, k)| [num::format_decimal(b), num::format_decimal(k)]),
    )
}

impl MarketImpactFn {
    pub fn zero() -> Self {
        MarketImpactFn::Constant { value: Q::zero() }
    }

    pub fn validate(&self) -> Result<(), EconError> {
        match self {
            MarketImpactFn::Constant { value } if value.is_negative() => {
                Err(EconError::MarketImpact("constant impact must be >= 0".into()))
            }
            MarketImpactFn::Linear { slope } if slope.is_negative() => {
                Err(EconError::MarketImpact("slope must be >= 0".into()))
            }
            MarketImpactFn::Table { points } => {
                if points.is_empty() {
                    return Err(EconError::MarketImpact("table is empty".into()));
                }
                for (b, k) in points {
                    if b.is_negative() || k.is_negative() {
                        return Err(EconError::MarketImpact("table entries must be >= 0".into()));
                    }
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(EconError::MarketImpact(
                            "table beta must be strictly increasing".into(),
                        ));
                    }
                    if w[1].1 < w[0].1 {
                        return Err(EconError::MarketImpact(
                            "table kappa must be weakly increasing".into(),
                        ));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Impact at `beta`. Table lookups take the value of the largest
    /// tabulated beta not above the query, and 0 below the first point.
    pub fn eval(&self, beta: &Q) -> Q {
        match self {
            MarketImpactFn::Constant { value } => value.clone(),
            MarketImpactFn::Linear { slope } => slope * beta,
            MarketImpactFn::Table { points } => points
                .iter()
                .take_while(|(b, _)| b <= beta)
                .last()
                .map(|(_, k)| k.clone())
                .unwrap_or_else(Q::zero),
        }
    }

    /// Samples beta on a grid and the table knots; fails if the function
    /// dips below zero or decreases anywhere.
    pub fn check_monotone(&self) -> Result<(), EconError> {
        let mut betas: Vec<Q> = (0..=64).map(|i| num::ratio(i, 4)).collect();
        if let MarketImpactFn::Table { points } = self {
            betas.extend(points.iter().map(|(b, _)| b.clone()));
            betas.sort();
        }
        let mut prev = Q::zero();
        for b in &betas {
            let k = self.eval(b);
            if k.is_negative() || k < prev {
                return Err(EconError::MarketImpact(format!(
                    "not monotone non-negative at beta={}",
                    num::format_decimal(b)
                )));
            }
            prev = k;
        }
        Ok(())
    }
}

impl FromStr for MarketImpactFn {
    type Err = EconError;

    /// Parses a bare constant, `linear(0.01)` or `table(1:0,2:0.1,4:0.3)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EconError::MarketImpact(format!("cannot parse `{s}`"));
        let s = s.trim();
        let dec = |x: &str| num::parse_decimal(x).map_err(|_| bad());
        let (name, inner) = match s.find('(') {
            Some(open) => (&s[..open], s[open + 1..].strip_suffix(')').ok_or_else(bad)?),
            None => ("constant", s),
        };
        let f = match name.trim().to_ascii_lowercase().as_str() {
            "constant" => MarketImpactFn::Constant { value: dec(inner)? },
            "linear" => MarketImpactFn::Linear { slope: dec(inner)? },
            "table" => MarketImpactFn::Table {
                points: inner
                    .split(',')
                    .map(|pair| {
                        let (b, k) = pair.split_once(':').ok_or_else(bad)?;
                        Ok((dec(b)?, dec(k)?))
                    })
                    .collect::<Result<_, EconError>>()?,
            },
            _ => return Err(bad()),
        };
        f.validate()?;
        Ok(f)
    }
}

/// Inputs to the attack-cost model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EconParams {
    /// USD per block, subsidy plus fees.
    #[serde(with = "num::decimal")]
    pub block_reward: Q,
    /// Hashes per block.
    #[serde(with = "num::decimal")]
    pub honest_hashpower: Q,
    /// USD per hash.
    #[serde(with = "num::decimal")]
    pub hash_cost: Q,
    /// Rented hashpower as a multiple of the honest hashpower.
    #[serde(with = "num::decimal")]
    pub beta: Q,
    pub escrow: u64,
    #[serde(with = "num::decimal")]
    pub tx_value: Q,
    pub kappa: MarketImpactFn,
    #[serde(with = "num::decimal")]
    pub delta: Q,
}

impl EconParams {
    /// Builds parameters with the honest hashpower set by free entry.
    pub fn with_free_entry(
        block_reward: Q,
        hash_cost: Q,
        beta: Q,
        escrow: u64,
        tx_value: Q,
        kappa: MarketImpactFn,
        delta: Q,
    ) -> Result<Self, EconError> {
        let honest_hashpower = free_entry_hashpower(&block_reward, &hash_cost)?;
        let p = EconParams {
            block_reward,
            honest_hashpower,
            hash_cost,
            beta,
            escrow,
            tx_value,
            kappa,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), EconError> {
        for (name, x) in [
            ("block_reward", &self.block_reward),
            ("honest_hashpower", &self.honest_hashpower),
            ("hash_cost", &self.hash_cost),
            ("tx_value", &self.tx_value),
        ] {
            if !x.is_positive() {
                return Err(EconError::NonPositive(name));
            }
        }
        if self.beta.is_negative() {
            return Err(EconError::NegativeBeta);
        }
        if self.escrow == 0 {
            return Err(EconError::ZeroEscrow);
        }
        if self.delta.is_negative() || self.delta > Q::one() {
            return Err(EconError::DeltaOutOfRange);
        }
        self.kappa.validate()?;
        self.kappa.check_monotone()
    }

    pub fn kappa_at_beta(&self) -> Q {
        self.kappa.eval(&self.beta)
    }

    pub fn is_free_entry(&self) -> bool {
        self.honest_hashpower == &self.block_reward / &self.hash_cost
    }

    fn require_majority(&self) -> Result<(), EconError> {
        self.validate()?;
        if self.beta <= Q::one() {
            return Err(EconError::MajorityRequired(num::format_decimal(&self.beta)));
        }
        Ok(())
    }
}

/// Free-entry equilibrium hashpower: `n = pb / ch`.
pub fn free_entry_hashpower(block_reward: &Q, hash_cost: &Q) -> Result<Q, EconError> {
    if !block_reward.is_positive() {
        return Err(EconError::NonPositive("block_reward"));
    }
    if !hash_cost.is_positive() {
        return Err(EconError::NonPositive("hash_cost"));
    }
    Ok(block_reward / hash_cost)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackCostBreakdown {
    #[serde(with = "num::decimal")]
    pub rental_cost: Q,
    #[serde(with = "num::decimal")]
    pub mining_revenue: Q,
    #[serde(with = "num::decimal")]
    pub net_cost: Q,
    #[serde(with = "num::decimal")]
    pub duration_honest_block_times: Q,
}

/// Rental cost minus discounted block rewards for one attack that mines
/// `e` blocks in `e / beta` honest-block-times.
///
/// With free-entry hashpower the net cost reduces to
/// `(kappa(beta) + delta) * e * pb`.
pub fn net_attack_cost(params: &EconParams) -> Result<AttackCostBreakdown, EconError> {
    params.require_majority()?;
    let e = num::q(params.escrow as i64);
    let kappa = params.kappa_at_beta();
    let rental_cost = (Q::one() + kappa) * &e * &params.honest_hashpower * &params.hash_cost;
    let mining_revenue = (Q::one() - &params.delta) * &e * &params.block_reward;
    let net_cost = &rental_cost - &mining_revenue;
    Ok(AttackCostBreakdown {
        rental_cost,
        mining_revenue,
        net_cost,
        duration_honest_block_times: e / &params.beta,
    })
}

/// Block reward above which an attack stops paying off.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SafeThreshold {
    Finite(#[serde(with = "num::decimal")] Q),
    /// No block reward is large enough: the attack costs nothing.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profitability {
    /// `profit > 0`; an attacker at exactly zero profit is assumed not to attack.
    pub profitable: bool,
    #[serde(with = "num::decimal")]
    pub profit: Q,
    pub safe_pb_threshold: SafeThreshold,
    pub cost: AttackCostBreakdown,
}

pub fn attack_profitability(params: &EconParams) -> Result<Profitability, EconError> {
    let cost = net_attack_cost(params)?;
    let profit = &params.tx_value - &cost.net_cost;
    let friction = params.kappa_at_beta() + &params.delta;
    let safe_pb_threshold = if friction.is_zero() {
        SafeThreshold::Unbounded
    } else {
        SafeThreshold::Finite(&params.tx_value / (friction * num::q(params.escrow as i64)))
    };
    Ok(Profitability {
        profitable: profit.is_positive(),
        profit,
        safe_pb_threshold,
        cost,
    })
}

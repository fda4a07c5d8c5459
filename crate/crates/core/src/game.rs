//! The Retaliation game: an alternating fight-or-quit contest between an
//! attacker (A, even times) and a defender (D, odd times) over a
//! transaction whose value decays with every completed attack.

use std::cmp::Ordering;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::decay::{self, BreakEvenTimes, DecayError, DecayFn, DefenderTime};
use crate::num::{self, Real, Q};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error(transparent)]
    Decay(#[from] DecayError),
    #[error("player {quitter} cannot move at t={t}")]
    ParityMismatch { quitter: Player, t: u64 },
    #[error("probability {0} is outside [0, 1]")]
    BadProbability(String),
    #[error("strategy profile must have at least one entry")]
    EmptyProfile,
    #[error("profile never quits; play does not terminate")]
    NonTerminating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    A,
    D,
}

impl Player {
    /// Mover at time `t`.
    pub fn at(t: u64) -> Self {
        if t.is_multiple_of(2) {
            Player::A
        } else {
            Player::D
        }
    }

    pub fn other(self) -> Self {
        match self {
            Player::A => Player::D,
            Player::D => Player::A,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::A => "A",
            Player::D => "D",
        })
    }
}

/// Payoff pair `(A, D)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payoffs {
    pub attacker: Q,
    pub defender: Q,
}

impl Payoffs {
    pub fn new(attacker: Q, defender: Q) -> Self {
        Payoffs { attacker, defender }
    }

    pub fn of(&self, p: Player) -> &Q {
        match p {
            Player::A => &self.attacker,
            Player::D => &self.defender,
        }
    }

    fn scaled(&self, w: &Q) -> Payoffs {
        Payoffs::new(&self.attacker * w, &self.defender * w)
    }

    fn plus(&self, o: &Payoffs) -> Payoffs {
        Payoffs::new(&self.attacker + &o.attacker, &self.defender + &o.defender)
    }
}

impl Serialize for Payoffs {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq([
            num::format_decimal(&self.attacker),
            num::format_decimal(&self.defender),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameParams {
    #[serde(with = "num::decimal")]
    pub v: Q,
    #[serde(with = "num::decimal")]
    pub c: Q,
    #[serde(with = "num::decimal")]
    pub r: Q,
    pub decay: DecayFn,
}

impl GameParams {
    pub fn new(v: Q, c: Q, r: Q, decay: DecayFn) -> Result<Self, GameError> {
        let g = GameParams { v, c, r, decay };
        g.validate()?;
        Ok(g)
    }

    /// Also rejects tables too short to contain the attacker's break-even.
    pub fn validate(&self) -> Result<(), GameError> {
        self.decay.validate()?;
        self.break_even()?;
        Ok(())
    }

    pub fn break_even(&self) -> Result<BreakEvenTimes, DecayError> {
        decay::break_even_times(&self.v, &self.c, &self.r, &self.decay)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TerminalOutcome {
    pub quitter: Player,
    pub time: u64,
    pub payoffs: Payoffs,
}

/// Payoffs when `quitter` quits at time `t`.
///
/// A quitting at even `t` has paid for `t/2` attacks and leaves D holding the
/// asset; D quitting at odd `t` has paid for `(t-1)/2` attacks plus the
/// reputation cost and leaves A holding the asset after `(t+1)/2` attacks.
pub fn terminal_payoffs(g: &GameParams, quitter: Player, t: u64) -> Result<Payoffs, GameError> {
    if Player::at(t) != quitter {
        return Err(GameError::ParityMismatch { quitter, t });
    }
    Ok(quit_payoffs(g, t))
}

pub(crate) fn quit_payoffs(g: &GameParams, t: u64) -> Payoffs {
    let prize = g.decay.phi_at(t) * &g.v;
    match Player::at(t) {
        Player::A => {
            let spent = num::q((t / 2) as i64) * &g.c;
            Payoffs::new(-spent.clone(), prize - spent)
        }
        Player::D => {
            let a_spent = num::q(t.div_ceil(2) as i64) * &g.c;
            let d_spent = num::q(((t - 1) / 2) as i64) * &g.c;
            Payoffs::new(prize - a_spent, -(&g.r) - d_spent)
        }
    }
}

/// One step past `floor(min(T_A, T_D))`; beyond it at least one player
/// quits for sure.
pub fn truncation_horizon(g: &GameParams) -> Result<u64, GameError> {
    let b = g.break_even()?;
    let t_min = match &b.t_defender {
        DefenderTime::Finite(td) if td.cmp_tol(&b.t_attacker) == Ordering::Less => td.clone(),
        _ => b.t_attacker.clone(),
    };
    Ok(t_min.floor().max(0) as u64 + 1)
}

/// What happens after the explicit entries of a profile run out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// `p_t = 0` beyond the last entry: the next mover quits.
    #[default]
    Quit,
    /// `p_t = 1` forever; only terminates if some explicit entry is 0.
    Fight,
}

/// Fight probabilities `p_0, p_1, ...`; A moves at even `t`, D at odd `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyProfile {
    probs: Vec<Q>,
    tail: Tail,
}

impl StrategyProfile {
    pub fn new(probs: Vec<Q>) -> Result<Self, GameError> {
        Self::with_tail(probs, Tail::Quit)
    }

    pub fn with_tail(probs: Vec<Q>, tail: Tail) -> Result<Self, GameError> {
        if probs.is_empty() {
            return Err(GameError::EmptyProfile);
        }
        if let Some(p) = probs.iter().find(|p| p.is_negative() || **p > Q::one()) {
            return Err(GameError::BadProbability(num::format_decimal(p)));
        }
        Ok(StrategyProfile { probs, tail })
    }

    /// Degenerate profile from fight/quit decisions.
    pub fn pure(fights: &[bool]) -> Self {
        let probs = fights
            .iter()
            .map(|&f| if f { Q::one() } else { Q::zero() })
            .collect();
        StrategyProfile::new(probs).expect("pure profile is valid")
    }

    pub fn probs(&self) -> &[Q] {
        &self.probs
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, t: u64) -> Q {
        match self.probs.get(t as usize) {
            Some(p) => p.clone(),
            None => match self.tail {
                Tail::Quit => Q::zero(),
                Tail::Fight => Q::one(),
            },
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.probs.iter().all(|p| p.is_zero() || p.is_one())
    }

    /// Copy padded with implicit entries up to `len`.
    pub fn padded(&self, len: usize) -> StrategyProfile {
        let mut probs = self.probs.clone();
        while probs.len() < len {
            probs.push(self.prob(probs.len() as u64));
        }
        StrategyProfile {
            probs,
            tail: self.tail,
        }
    }

    /// Same profile with `p_t` replaced.
    pub fn with_prob(&self, t: u64, p: Q) -> StrategyProfile {
        let mut out = self.padded(t as usize + 1);
        out.probs[t as usize] = p;
        out
    }

    /// Equivalent quit-tail profile if every subgame terminates.
    pub(crate) fn terminating(&self) -> Result<StrategyProfile, GameError> {
        match self.tail {
            Tail::Quit => Ok(self.clone()),
            Tail::Fight if self.probs.last().is_some_and(|p| p.is_zero()) => Ok(StrategyProfile {
                probs: self.probs.clone(),
                tail: Tail::Quit,
            }),
            Tail::Fight => Err(GameError::NonTerminating),
        }
    }
}

impl fmt::Display for StrategyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.probs.iter().map(num::format_decimal).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

impl Serialize for StrategyProfile {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        num::decimal_vec::serialize(&self.probs, s)
    }
}

impl<'de> Deserialize<'de> for StrategyProfile {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let probs = num::decimal_vec::deserialize(d)?;
        StrategyProfile::new(probs).map_err(serde::de::Error::custom)
    }
}

/// Literal no-attack profile: D fights at every odd `t <= T_D`, everything
/// else quits. Covers `t = 0 ..= truncation_horizon`.
pub fn paper_spe_profile(g: &GameParams) -> Result<StrategyProfile, GameError> {
    let horizon = truncation_horizon(g)?;
    let b = g.break_even()?;
    let fights: Vec<bool> = (0..=horizon)
        .map(|t| {
            t % 2 == 1
                && match &b.t_defender {
                    DefenderTime::Unbounded => true,
                    DefenderTime::Finite(td) => {
                        Real::Exact(num::q(t as i64)).cmp_tol(td) != Ordering::Greater
                    }
                }
        })
        .collect();
    Ok(StrategyProfile::pure(&fights))
}

/// Expected payoffs `(A, D)` of playing `profile` from the root.
pub fn expected_utilities(g: &GameParams, profile: &StrategyProfile) -> Result<Payoffs, GameError> {
    if profile.tail() == Tail::Fight && !profile.probs().iter().any(|p| p.is_zero()) {
        return Err(GameError::NonTerminating);
    }
    let mut total = Payoffs::new(Q::zero(), Q::zero());
    let mut reach = Q::one();
    let mut t = 0u64;
    while !reach.is_zero() {
        let p = profile.prob(t);
        let stop = &reach * (Q::one() - &p);
        if !stop.is_zero() {
            total = total.plus(&quit_payoffs(g, t).scaled(&stop));
        }
        reach *= p;
        t += 1;
    }
    Ok(total)
}

/// Expected payoffs of the subgame starting at each `t` in `0 ..= len`,
/// where the profile is read with its implicit quit beyond `len - 1`.
pub(crate) fn continuation_values(g: &GameParams, profile: &StrategyProfile, len: usize) -> Vec<Payoffs> {
    let mut values = vec![quit_payoffs(g, len as u64)];
    for t in (0..len as u64).rev() {
        let p = profile.prob(t);
        let next = values.last().expect("non-empty");
        let v = next.scaled(&p).plus(&quit_payoffs(g, t).scaled(&(Q::one() - &p)));
        values.push(v);
    }
    values.reverse();
    values
}

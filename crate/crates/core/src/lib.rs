//! Economics of proof-of-work double-spend attacks and the attacker/defender
//! Retaliation game.
//!
//! - [`econ`]: rented-hashrate attack cost and the transaction safety bound.
//! - [`decay`]: value-decay functions and break-even times.
//! - [`game`]: Retaliation game payoffs, profiles and expected utilities.
//! - [`solver`]: backward induction, one-deviation verification, an
//!   exhaustive oracle and the reputation safety conditions.
//! - [`sim`]: seeded fork/race simulator that emits reorg logs.
//! - [`ingest`]: reorg-log parsing, classification, episode grouping and
//!   per-chain summaries.

pub mod decay;
pub mod econ;
pub mod game;
pub mod ingest;
pub mod num;
pub mod sim;
pub mod solver;

pub use decay::{BreakEvenTimes, DecayFn, DefenderTime};
pub use econ::{EconParams, MarketImpactFn};
pub use game::{GameParams, Payoffs, Player, StrategyProfile};
pub use num::{Real, Q};
pub use solver::{DeviationReport, EquilibriumResult};

//! Fork simulator for single attacks and full retaliation episodes.
//!
//! Stylized mode replays the closed-form accounting: the attacker mines its
//! `e` blocks in `e / beta` honest-block-times and each reorg replaces the
//! canonical suffix with one more block. Race mode draws block arrivals for
//! both branches and applies the heaviest-chain rule.
//!
//! Conventions shared by both modes:
//! * the double-spend transaction sits in attacker block 1, so the `e`
//!   attacker blocks include it;
//! * `duration_honest_block_times` is the time the attacking branch needs to
//!   mine its `e` blocks (the rental window), `reveal_time` is when the
//!   branch actually overtakes the public chain;
//! * every block carries one unit of work (no difficulty adjustment).

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::decay::{DecayError, DecayFn};
use crate::econ::{self, EconError, EconParams};
use crate::game::{GameError, GameParams, Payoffs, Player, StrategyProfile};
use crate::ingest::ReorgEvent;
use crate::num::{self, Q};
use crate::solver::{self, SolverError};

/// Block arrivals (or ticks) after which a run is abandoned as undecided.
pub const RUN_CAP: u64 = 1_000_000;

pub const CONVENTION_NOTE: &str = "double-spend transaction counted as attacker block 1";

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Econ(#[from] EconError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("ticks_per_honest_block must be positive")]
    ZeroTicks,
    #[error("combined strategy profile never quits")]
    NonTerminating,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockModel {
    /// Blocks arrive on a fixed tick grid.
    Deterministic,
    Exponential {
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Stylized,
    Race,
}

/// Labels used when emitting reorg events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogLabels {
    pub chain: String,
    pub attacker_tag: String,
    pub defender_tag: String,
    pub fork_height: u64,
    pub start_timestamp: i64,
    pub block_interval_secs: u64,
}

impl Default for LogLabels {
    fn default() -> Self {
        LogLabels {
            chain: "SIM".into(),
            attacker_tag: "addr-A".into(),
            defender_tag: "addr-D".into(),
            fork_height: 1_000_000,
            start_timestamp: 1_577_836_800,
            block_interval_secs: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub econ: EconParams,
    pub game: GameParams,
    pub block_model: BlockModel,
    pub mode: SimMode,
    pub ticks_per_honest_block: u64,
    pub labels: LogLabels,
}

impl SimConfig {
    pub fn new(econ: EconParams, game: GameParams, block_model: BlockModel, mode: SimMode) -> Self {
        SimConfig {
            econ,
            game,
            block_model,
            mode,
            ticks_per_honest_block: 100,
            labels: LogLabels::default(),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        self.econ.validate()?;
        self.game.validate()?;
        if self.ticks_per_honest_block == 0 {
            return Err(SimError::ZeroTicks);
        }
        Ok(())
    }

    fn rng(&self, run_index: u64) -> ChaCha8Rng {
        let seed = match self.block_model {
            BlockModel::Exponential { seed } => seed,
            BlockModel::Deterministic => 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run_index);
        rng
    }

    fn tag(&self, p: Player) -> String {
        match p {
            Player::A => self.labels.attacker_tag.clone(),
            Player::D => self.labels.defender_tag.clone(),
        }
    }

    fn timestamp(&self, time: &Q) -> i64 {
        let secs = (time * num::q(self.labels.block_interval_secs as i64)).floor();
        self.labels.start_timestamp + secs.to_integer().to_i64().unwrap_or(i64::MAX / 2)
    }
}

/// Two branches growing from a common fork block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainState {
    pub fork_height: u64,
    pub public_tip_height: u64,
    pub attacker_tip_height: u64,
    pub public_work: u64,
    pub attacker_work: u64,
    /// Confirmations of the payment on the public branch.
    pub escrow_confirmations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Public,
    Attacker,
}

impl ChainState {
    pub fn at_fork(fork_height: u64, public_blocks: u64) -> Self {
        ChainState {
            fork_height,
            public_tip_height: fork_height + public_blocks,
            attacker_tip_height: fork_height,
            public_work: public_blocks,
            attacker_work: 0,
            escrow_confirmations: 0,
        }
    }

    /// Heaviest chain; the incumbent public branch wins ties.
    pub fn canonical(&self) -> Branch {
        if self.attacker_work > self.public_work {
            Branch::Attacker
        } else {
            Branch::Public
        }
    }

    fn mine_public(&mut self) {
        self.public_tip_height += 1;
        self.public_work += 1;
        self.escrow_confirmations += 1;
    }

    fn mine_attacker(&mut self) {
        self.attacker_tip_height += 1;
        self.attacker_work += 1;
    }

    fn public_blocks(&self) -> u64 {
        self.public_tip_height - self.fork_height
    }

    fn attacker_blocks(&self) -> u64 {
        self.attacker_tip_height - self.fork_height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundOutcome {
    pub t: u64,
    pub mover: Player,
    pub fought: bool,
    /// Asset value once this move is resolved.
    #[serde(with = "num::decimal")]
    pub asset_value: Q,
    pub depth: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub success: bool,
    /// Run hit the cap before resolving.
    pub undecided: bool,
    #[serde(with = "num::decimal")]
    pub duration_honest_block_times: Q,
    #[serde(with = "num::decimal")]
    pub reveal_time: Q,
    pub attacker_blocks: u64,
    #[serde(with = "num::decimal")]
    pub realized_cost: Q,
    #[serde(with = "num::decimal")]
    pub realized_revenue: Q,
    #[serde(with = "num::decimal")]
    pub realized_net: Q,
    pub events: Vec<ReorgEvent>,
    pub rounds: Vec<RoundOutcome>,
    pub payoffs: Option<Payoffs>,
    pub quitter: Option<(Player, u64)>,
    pub convention: &'static str,
}

/// Result of one branch trying to overtake the canonical chain.
#[derive(Debug, Clone)]
struct RaceOutcome {
    state: ChainState,
    /// Time when the fighting branch held `target_blocks` blocks.
    target_time: Q,
    reveal_time: Q,
}

/// Clock for block arrivals on two branches.
enum Arrivals {
    Ticks {
        per_block: u64,
        /// Fighter blocks after `tick` ticks: `floor(tick * numer / denom)`.
        numer: BigInt,
        denom: BigInt,
        tick: u64,
        mined: u64,
    },
    Random {
        rng: Box<ChaCha8Rng>,
        exp: Exp<f64>,
        p_fighter: f64,
        now: f64,
    },
}

impl Arrivals {
    fn new(cfg: &SimConfig, rng: ChaCha8Rng) -> Self {
        match cfg.block_model {
            BlockModel::Deterministic => Arrivals::Ticks {
                per_block: cfg.ticks_per_honest_block,
                numer: cfg.econ.beta.numer().clone(),
                denom: cfg.econ.beta.denom() * BigInt::from(cfg.ticks_per_honest_block),
                tick: 0,
                mined: 0,
            },
            BlockModel::Exponential { .. } => {
                let beta = num::to_f64(&cfg.econ.beta);
                Arrivals::Random {
                    rng: Box::new(rng),
                    exp: Exp::new(1.0 + beta).expect("positive rate"),
                    p_fighter: beta / (1.0 + beta),
                    now: 0.0,
                }
            }
        }
    }

    fn now(&self) -> Q {
        match self {
            Arrivals::Ticks { per_block, tick, .. } => num::ratio(*tick as i64, *per_block as i64),
            Arrivals::Random { now, .. } => num::from_f64_rounded(*now),
        }
    }

    /// Advances to the next arrival; returns (public blocks, fighter blocks).
    fn step(&mut self) -> (u64, u64) {
        match self {
            Arrivals::Ticks {
                per_block,
                numer,
                denom,
                tick,
                mined,
            } => {
                *tick += 1;
                let total = (BigInt::from(*tick) * &*numer)
                    .div_floor(denom)
                    .to_u64()
                    .unwrap_or(0);
                let fighter = total.saturating_sub(*mined);
                *mined = total;
                (u64::from(*tick % *per_block == 0), fighter)
            }
            Arrivals::Random {
                rng,
                exp,
                p_fighter,
                now,
            } => {
                *now += exp.sample(&mut **rng);
                if rng.random_bool(*p_fighter) {
                    (0, 1)
                } else {
                    (1, 0)
                }
            }
        }
    }

    fn fork(&mut self) {
        match self {
            Arrivals::Ticks { tick, mined, .. } => {
                *tick = 0;
                *mined = 0;
            }
            Arrivals::Random { now, .. } => *now = 0.0,
        }
    }
}

/// Grows both branches until the fighter is strictly heavier and the
/// public branch carries `escrow` confirmations.
fn race(
    arrivals: &mut Arrivals,
    mut state: ChainState,
    escrow: u64,
    target_blocks: u64,
) -> Option<RaceOutcome> {
    arrivals.fork();
    let mut target_time = None;
    for _ in 0..RUN_CAP {
        let (public, fighter) = arrivals.step();
        for _ in 0..public {
            state.mine_public();
        }
        for _ in 0..fighter {
            state.mine_attacker();
        }
        if target_time.is_none() && state.attacker_blocks() >= target_blocks {
            target_time = Some(arrivals.now());
        }
        if state.canonical() == Branch::Attacker && state.escrow_confirmations >= escrow {
            let reveal_time = arrivals.now();
            return Some(RaceOutcome {
                state,
                target_time: target_time.unwrap_or_else(|| reveal_time.clone()),
                reveal_time,
            });
        }
    }
    None
}

fn attack_event(cfg: &SimConfig, time: &Q, state: &ChainState, who: Player, value: Q) -> ReorgEvent {
    ReorgEvent {
        chain_id: cfg.labels.chain.clone(),
        timestamp: cfg.timestamp(time),
        height: state.attacker_tip_height,
        depth: state.public_blocks(),
        blocks_added: state.attacker_blocks(),
        conflicting_spend: true,
        value_usd: value,
        beneficiary: Some(cfg.tag(who)),
    }
}

/// One double-spend attack. `run_index` selects the random stream.
pub fn run_attack_episode(cfg: &SimConfig, run_index: u64) -> Result<EpisodeResult, SimError> {
    cfg.validate()?;
    let e = cfg.econ.escrow;
    let p = &cfg.econ;
    let rental_rate = (Q::one() + p.kappa_at_beta()) * &p.beta * &p.honest_hashpower * &p.hash_cost;
    let reward = (Q::one() - &p.delta) * &p.block_reward;

    let base = EpisodeResult {
        success: false,
        undecided: false,
        duration_honest_block_times: Q::zero(),
        reveal_time: Q::zero(),
        attacker_blocks: 0,
        realized_cost: Q::zero(),
        realized_revenue: Q::zero(),
        realized_net: Q::zero(),
        events: Vec::new(),
        rounds: Vec::new(),
        payoffs: None,
        quitter: None,
        convention: CONVENTION_NOTE,
    };

    match cfg.mode {
        SimMode::Stylized => {
            let breakdown = econ::net_attack_cost(p)?;
            let duration = breakdown.duration_honest_block_times.clone();
            let state = ChainState {
                fork_height: cfg.labels.fork_height,
                public_tip_height: cfg.labels.fork_height + e,
                attacker_tip_height: cfg.labels.fork_height + e + 1,
                public_work: e,
                attacker_work: e + 1,
                escrow_confirmations: e,
            };
            let event = attack_event(cfg, &duration, &state, Player::A, p.tx_value.clone());
            Ok(EpisodeResult {
                success: true,
                reveal_time: duration.clone(),
                duration_honest_block_times: duration,
                attacker_blocks: e,
                realized_cost: breakdown.rental_cost,
                realized_revenue: breakdown.mining_revenue,
                realized_net: breakdown.net_cost,
                events: vec![event],
                ..base
            })
        }
        SimMode::Race => {
            let mut arrivals = Arrivals::new(cfg, cfg.rng(run_index));
            let start = ChainState::at_fork(cfg.labels.fork_height, 0);
            let Some(out) = race(&mut arrivals, start, e, e) else {
                return Ok(EpisodeResult {
                    undecided: true,
                    ..base
                });
            };
            let blocks = out.state.attacker_blocks();
            let realized_cost = &rental_rate * &out.reveal_time;
            let realized_revenue = &reward * num::q(blocks as i64);
            let event = attack_event(cfg, &out.reveal_time, &out.state, Player::A, p.tx_value.clone());
            Ok(EpisodeResult {
                success: true,
                duration_honest_block_times: out.target_time,
                reveal_time: out.reveal_time,
                attacker_blocks: blocks,
                realized_net: &realized_cost - &realized_revenue,
                realized_cost,
                realized_revenue,
                events: vec![event],
                ..base
            })
        }
    }
}

/// Mean and standard error over independent runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub runs: u64,
    pub successes: u64,
    pub undecided: u64,
    pub mean_duration: f64,
    pub std_err_duration: f64,
    pub mean_reveal_time: f64,
    pub mean_realized_net: f64,
}

pub fn run_attack_batch(cfg: &SimConfig, runs: u64) -> Result<(BatchSummary, Vec<EpisodeResult>), SimError> {
    let results = (0..runs)
        .into_par_iter()
        .map(|i| run_attack_episode(cfg, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((summarize_batch(&results), results))
}

pub fn summarize_batch(results: &[EpisodeResult]) -> BatchSummary {
    let decided: Vec<&EpisodeResult> = results.iter().filter(|r| !r.undecided).collect();
    let n = decided.len() as f64;
    let mean = |f: &dyn Fn(&EpisodeResult) -> f64| {
        if decided.is_empty() {
            f64::NAN
        } else {
            decided.iter().map(|r| f(r)).sum::<f64>() / n
        }
    };
    let mean_duration = mean(&|r| num::to_f64(&r.duration_honest_block_times));
    let var = if decided.len() > 1 {
        decided
            .iter()
            .map(|r| (num::to_f64(&r.duration_honest_block_times) - mean_duration).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    BatchSummary {
        runs: results.len() as u64,
        successes: results.iter().filter(|r| r.success).count() as u64,
        undecided: results.iter().filter(|r| r.undecided).count() as u64,
        mean_duration,
        std_err_duration: (var / n.max(1.0)).sqrt(),
        mean_reveal_time: mean(&|r| num::to_f64(&r.reveal_time)),
        mean_realized_net: mean(&|r| num::to_f64(&r.realized_net)),
    }
}

fn combined_prob(sigma_a: &StrategyProfile, sigma_d: &StrategyProfile, t: u64) -> Q {
    match Player::at(t) {
        Player::A => sigma_a.prob(t),
        Player::D => sigma_d.prob(t),
    }
}

/// Index of the first move that quits for sure, if any.
fn quit_bound(sigma_a: &StrategyProfile, sigma_d: &StrategyProfile) -> Option<u64> {
    let len = sigma_a.len().max(sigma_d.len()) as u64;
    (0..len + 2).find(|&t| combined_prob(sigma_a, sigma_d, t).is_zero())
}

/// Plays the Retaliation game: A follows `sigma_a` at even moves, D follows
/// `sigma_d` at odd moves. Each fight is a reorg of the current canonical
/// suffix, paid for at the game's cost `c`.
pub fn run_retaliation_episode(
    cfg: &SimConfig,
    sigma_a: &StrategyProfile,
    sigma_d: &StrategyProfile,
    run_index: u64,
) -> Result<EpisodeResult, SimError> {
    cfg.validate()?;
    let bound = quit_bound(sigma_a, sigma_d).ok_or(SimError::NonTerminating)?;
    let g = &cfg.game;
    let e = cfg.econ.escrow;
    let mut rng = cfg.rng(run_index);
    let mut arrivals = Arrivals::new(cfg, cfg.rng(run_index).clone());
    // keep strategy draws off the block-arrival stream
    rng.set_stream(run_index ^ (1 << 63));

    let fork = cfg.labels.fork_height;
    let mut canonical_len = e;
    let mut clock = Q::zero();
    let mut fights = [0u64, 0u64];
    let mut attacker_blocks = 0u64;
    let mut events = Vec::new();
    let mut rounds = Vec::new();
    let mut undecided = false;
    let mut first_window = Q::zero();

    let mut t = 0u64;
    let quit_time = loop {
        let mover = Player::at(t);
        let p = combined_prob(sigma_a, sigma_d, t);
        let fight = if t >= bound || p.is_zero() {
            false
        } else if p.is_one() {
            true
        } else {
            rng.random::<f64>() < num::to_f64(&p)
        };
        if !fight {
            rounds.push(RoundOutcome {
                t,
                mover,
                fought: false,
                asset_value: g.decay.phi_at(t) * &g.v,
                depth: None,
            });
            break Some(t);
        }

        let value_after = g.decay.phi_at(t + 1) * &g.v;
        let (state, elapsed, window) = match cfg.mode {
            SimMode::Stylized => {
                let added = canonical_len + 1;
                let state = ChainState {
                    fork_height: fork,
                    public_tip_height: fork + canonical_len,
                    attacker_tip_height: fork + added,
                    public_work: canonical_len,
                    attacker_work: added,
                    escrow_confirmations: canonical_len,
                };
                let window = num::q(if t == 0 { e } else { added } as i64) / &cfg.econ.beta;
                let elapsed = num::q(added as i64) / &cfg.econ.beta;
                (state, elapsed, window)
            }
            SimMode::Race => {
                let escrow = if t == 0 { e } else { 0 };
                let start = ChainState::at_fork(fork, if t == 0 { 0 } else { canonical_len });
                match race(&mut arrivals, start, escrow, e) {
                    Some(out) => (out.state, out.reveal_time.clone(), out.target_time),
                    None => {
                        undecided = true;
                        break None;
                    }
                }
            }
        };
        if t == 0 {
            first_window = window;
        }
        clock += &elapsed;
        events.push(attack_event(cfg, &clock, &state, mover, value_after.clone()));
        rounds.push(RoundOutcome {
            t,
            mover,
            fought: true,
            asset_value: value_after,
            depth: Some(state.public_blocks()),
        });
        if mover == Player::A {
            attacker_blocks += state.attacker_blocks();
        }
        canonical_len = state.attacker_blocks();
        fights[mover as usize] += 1;
        t += 1;
    };

    let c = &g.c;
    let cost_a = num::q(fights[0] as i64) * c;
    let cost_d = num::q(fights[1] as i64) * c;
    let (payoffs, quitter, revenue) = match quit_time {
        Some(t) => {
            let quitter = Player::at(t);
            let held = g.decay.phi_at(t) * &g.v;
            let payoffs = match quitter {
                Player::A => Payoffs::new(-cost_a.clone(), &held - &cost_d),
                Player::D => Payoffs::new(&held - &cost_a, -&g.r - &cost_d),
            };
            let revenue = if quitter == Player::D { held } else { Q::zero() };
            (Some(payoffs), Some((quitter, t)), revenue)
        }
        None => (None, None, Q::zero()),
    };
    let success = matches!(quitter, Some((Player::D, _)));
    Ok(EpisodeResult {
        success,
        undecided,
        duration_honest_block_times: first_window,
        reveal_time: clock,
        attacker_blocks,
        realized_net: &cost_a - &revenue,
        realized_cost: cost_a,
        realized_revenue: revenue,
        events,
        rounds,
        payoffs,
        quitter,
        convention: CONVENTION_NOTE,
    })
}

/// Cartesian grid of game parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub v: Vec<Q>,
    /// Attack costs; read as fractions of `v` when `c_relative` is set.
    pub c: Vec<Q>,
    pub c_relative: bool,
    pub r: Vec<Q>,
    pub decay: Vec<DecayFn>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub v: String,
    pub c: String,
    pub r: String,
    pub decay: String,
    #[serde(rename = "T_A")]
    pub t_attacker: String,
    #[serde(rename = "T_D")]
    pub t_defender: String,
    pub d_last_mover: bool,
    pub linear_cond: String,
    pub general_cond: String,
    pub attack_occurs: bool,
}

pub const SWEEP_HEADER: [&str; 10] = [
    "v",
    "c",
    "r",
    "decay",
    "T_A",
    "T_D",
    "d_last_mover",
    "linear_cond",
    "general_cond",
    "attack_occurs",
];

impl SweepGrid {
    /// Valid games in grid order; points that violate game invariants
    /// (for example `c >= v`) are skipped.
    pub fn games(&self) -> Vec<GameParams> {
        let mut out = Vec::new();
        for v in &self.v {
            for c in &self.c {
                let c = if self.c_relative { c * v } else { c.clone() };
                for r in &self.r {
                    for d in &self.decay {
                        if let Ok(g) = GameParams::new(v.clone(), c.clone(), r.clone(), d.clone()) {
                            out.push(g);
                        }
                    }
                }
            }
        }
        out
    }
}

fn opt_bool(x: Option<bool>) -> String {
    x.map_or_else(|| "n/a".into(), |b| b.to_string())
}

pub fn sweep_row(g: &GameParams) -> Result<SweepRow, SimError> {
    let be = g.break_even().map_err(|e: DecayError| SimError::Game(e.into()))?;
    let eq = solver::backward_induction(g)?;
    let safety = solver::reputation_safety(g)?;
    Ok(SweepRow {
        v: num::format_decimal(&g.v),
        c: num::format_decimal(&g.c),
        r: num::format_decimal(&g.r),
        decay: g.decay.to_string(),
        t_attacker: be.t_attacker.to_string(),
        t_defender: be.t_defender.to_string(),
        d_last_mover: safety.d_last_mover,
        linear_cond: opt_bool(safety.linear_condition),
        general_cond: opt_bool(safety.general_condition),
        attack_occurs: eq.attack_occurs,
    })
}

/// Solves every grid point in parallel; rows keep grid order.
pub fn sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>, SimError> {
    grid.games().par_iter().map(sweep_row).collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, SimError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econ::MarketImpactFn;
    use crate::game::terminal_payoffs;
    use crate::ingest::{parse_reorg_log, write_csv, LogFormat};
    use crate::num::{q, ratio};
    use proptest::prelude::*;

    fn econ(beta: Q, e: u64, kappa: Q, delta: Q) -> EconParams {
        EconParams::with_free_entry(
            q(100_000),
            ratio(1, 1000),
            beta,
            e,
            q(1_000_000),
            MarketImpactFn::Constant { value: kappa },
            delta,
        )
        .unwrap()
    }

    fn worked_game() -> GameParams {
        GameParams::new(
            q(10_000),
            q(4000),
            q(2000),
            DecayFn::linear(ratio(1, 10)).unwrap(),
        )
        .unwrap()
    }

    fn stylized() -> SimConfig {
        SimConfig::new(
            econ(q(2), 6, Q::zero(), Q::zero()),
            worked_game(),
            BlockModel::Deterministic,
            SimMode::Stylized,
        )
    }

    #[test]
    fn stylized_attack_window() {
        let r = run_attack_episode(&stylized(), 0).unwrap();
        assert_eq!(r.duration_honest_block_times, q(3));
        assert_eq!(r.attacker_blocks, 6);
        assert_eq!(r.realized_net, Q::zero());
        assert_eq!(r.events.len(), 1);
        assert_eq!(r.events[0].depth, 6);
        assert!(r.events[0].conflicting_spend);
    }

    #[test]
    fn stylized_requires_majority() {
        let mut cfg = stylized();
        cfg.econ.beta = q(1);
        assert!(matches!(
            run_attack_episode(&cfg, 0),
            Err(SimError::Econ(EconError::MajorityRequired(_)))
        ));
    }

    #[test]
    fn deterministic_race_matches_window() {
        let mut cfg = stylized();
        cfg.mode = SimMode::Race;
        let r = run_attack_episode(&cfg, 0).unwrap();
        assert!(r.success);
        assert_eq!(r.duration_honest_block_times, q(3));
        let ev = &r.events[0];
        assert!(ev.depth >= 6);
        assert!(ev.blocks_added > ev.depth);
    }

    #[test]
    fn race_with_minority_is_undecided() {
        let mut cfg = stylized();
        cfg.mode = SimMode::Race;
        cfg.econ.beta = ratio(1, 2);
        cfg.ticks_per_honest_block = 1000;
        let r = run_attack_episode(&cfg, 0).unwrap();
        assert!(r.undecided && !r.success);
    }

    #[test]
    fn exponential_race_is_reproducible() {
        let mut cfg = stylized();
        cfg.mode = SimMode::Race;
        cfg.block_model = BlockModel::Exponential { seed: 7 };
        let a = serde_json::to_string(&run_attack_episode(&cfg, 3).unwrap()).unwrap();
        let b = serde_json::to_string(&run_attack_episode(&cfg, 3).unwrap()).unwrap();
        let c = serde_json::to_string(&run_attack_episode(&cfg, 4).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn exponential_race_mean_near_window() {
        let mut cfg = stylized();
        cfg.mode = SimMode::Race;
        cfg.block_model = BlockModel::Exponential { seed: 11 };
        let (s, results) = run_attack_batch(&cfg, 2000).unwrap();
        assert_eq!(s.successes, 2000);
        assert!((s.mean_duration - 3.0).abs() < 3.0 * s.std_err_duration + 1e-9);
        for r in &results {
            assert!(r.events[0].depth >= 6);
            assert!(r.events[0].blocks_added > r.events[0].depth);
        }
    }

    #[test]
    fn retaliation_immediate_quit() {
        let quit = StrategyProfile::pure(&[false]);
        let r = run_retaliation_episode(&stylized(), &quit, &quit, 0).unwrap();
        assert!(r.events.is_empty());
        assert_eq!(r.payoffs, Some(Payoffs::new(q(0), q(10_000))));
    }

    #[test]
    fn retaliation_one_attack_defender_quits() {
        let a = StrategyProfile::pure(&[true]);
        let d = StrategyProfile::pure(&[false, false]);
        let r = run_retaliation_episode(&stylized(), &a, &d, 0).unwrap();
        assert_eq!(r.events.len(), 1);
        assert_eq!(r.payoffs, Some(Payoffs::new(q(5000), q(-2000))));
        assert_eq!(
            r.payoffs.unwrap(),
            terminal_payoffs(&worked_game(), Player::D, 1).unwrap()
        );
    }

    #[test]
    fn retaliation_two_rounds_each() {
        let both = StrategyProfile::pure(&[true, true, true, true, false]);
        let r = run_retaliation_episode(&stylized(), &both, &both, 0).unwrap();
        assert_eq!(r.events.len(), 4);
        let depths: Vec<u64> = r.events.iter().map(|e| e.depth).collect();
        assert!(depths.windows(2).all(|w| w[0] < w[1]), "{depths:?}");
        let tags: Vec<_> = r.events.iter().map(|e| e.beneficiary.clone().unwrap()).collect();
        assert_eq!(tags, ["addr-A", "addr-D", "addr-A", "addr-D"]);
        assert_eq!(
            r.payoffs.unwrap(),
            terminal_payoffs(&worked_game(), Player::A, 4).unwrap()
        );
    }

    #[test]
    fn retaliation_rejects_endless_fighting() {
        let forever = StrategyProfile::with_tail(vec![q(1)], crate::game::Tail::Fight).unwrap();
        assert!(matches!(
            run_retaliation_episode(&stylized(), &forever, &forever, 0),
            Err(SimError::NonTerminating)
        ));
    }

    #[test]
    fn race_retaliation_depths_grow() {
        let mut cfg = stylized();
        cfg.mode = SimMode::Race;
        cfg.block_model = BlockModel::Exponential { seed: 5 };
        let both = StrategyProfile::pure(&[true, true, true, false]);
        let r = run_retaliation_episode(&cfg, &both, &both, 2).unwrap();
        assert_eq!(r.events.len(), 3);
        assert!(r.events.windows(2).all(|w| w[0].depth < w[1].depth));
        assert_eq!(
            r.payoffs.unwrap(),
            terminal_payoffs(&worked_game(), Player::D, 3).unwrap()
        );
    }

    #[test]
    fn emitted_logs_round_trip() {
        let both = StrategyProfile::pure(&[true, true, true, true, false]);
        let r = run_retaliation_episode(&stylized(), &both, &both, 0).unwrap();
        let text = write_csv(&r.events).unwrap();
        let parsed = parse_reorg_log(text.as_bytes(), LogFormat::Csv).unwrap();
        assert_eq!(parsed, r.events);
        assert_eq!(write_csv(&parsed).unwrap(), text);
    }

    fn grid() -> SweepGrid {
        SweepGrid {
            v: vec![q(10_000)],
            c: vec![ratio(2, 5), ratio(89, 100)],
            c_relative: true,
            r: vec![q(200), q(1001), q(5000)],
            decay: vec![DecayFn::linear(ratio(1, 10)).unwrap()],
        }
    }

    #[test]
    fn sweep_examples() {
        let one = SweepGrid {
            c: vec![ratio(2, 5)],
            r: vec![q(2000)],
            ..grid()
        };
        assert_eq!(sweep(&one).unwrap().len(), 1);
        let rows = sweep(&grid()).unwrap();
        assert_eq!(
            sweep_csv(&rows).unwrap(),
            sweep_csv(&sweep(&grid()).unwrap()).unwrap()
        );
        for row in &rows {
            if row.linear_cond == "true" {
                assert!(!row.attack_occurs, "{row:?}");
            }
        }
        let csv = sweep_csv(&rows).unwrap();
        assert!(csv.starts_with("v,c,r,decay,T_A,T_D,d_last_mover,linear_cond,general_cond,attack_occurs\n"));
        assert_eq!(csv.lines().count(), rows.len() + 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn stylized_net_matches_closed_form(
            k in 0i64..=50, d in 0i64..=50, e in 1u64..20, pb in 1i64..1_000_000, beta in 101i64..1000,
        ) {
            let kappa = ratio(k, 100);
            let delta = ratio(d, 100);
            let p = EconParams::with_free_entry(
                q(pb), ratio(1, 1000), ratio(beta, 100), e, q(1),
                MarketImpactFn::Constant { value: kappa.clone() }, delta.clone(),
            ).unwrap();
            let cfg = SimConfig::new(p, worked_game(), BlockModel::Deterministic, SimMode::Stylized);
            let r = run_attack_episode(&cfg, 0).unwrap();
            prop_assert_eq!(&r.realized_net, &((kappa + delta) * q(e as i64) * q(pb)));
            prop_assert_eq!(&r.realized_net, &(&r.realized_cost - &r.realized_revenue));
            prop_assert_eq!(r.duration_honest_block_times, q(e as i64) / ratio(beta, 100));
        }

        #[test]
        fn stylized_payoffs_match_game(fights in prop::collection::vec(any::<bool>(), 1..=10)) {
            let profile = StrategyProfile::pure(&fights);
            let g = worked_game();
            let r = run_retaliation_episode(&stylized(), &profile, &profile, 0).unwrap();
            let t = fights.iter().position(|f| !f).unwrap_or(fights.len()) as u64;
            let expected = terminal_payoffs(&g, Player::at(t), t).unwrap();
            prop_assert_eq!(r.payoffs.unwrap(), expected);
            prop_assert_eq!(r.events.len() as u64, t);
        }
    }
}

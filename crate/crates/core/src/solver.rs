//! Subgame perfect equilibria of the Retaliation game.
//!
//! The game is solved on its truncation: the mover at `horizon + 1` quits.
//! Past the horizon at least one player quits for sure, and every quit
//! happening earlier on the equilibrium path is decided before the
//! truncation can matter, so the equilibrium path of the truncated game is
//! the equilibrium path of the full game.
//!
//! Ties resolve to quit everywhere: a mover that gains nothing by fighting
//! stops.

use std::cmp::Ordering;

use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::decay::{parity_floor, DecayFn, DefenderTime, Parity};
use crate::game::{
    self, paper_spe_profile, quit_payoffs, terminal_payoffs, truncation_horizon, GameError, GameParams,
    Payoffs, Player, StrategyProfile, TerminalOutcome,
};
use crate::num::{self, Real, Q};

/// Largest horizon the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_HORIZON: u64 = 14;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("horizon {horizon} exceeds the brute-force limit {limit}")]
    HorizonTooLarge { horizon: u64, limit: u64 },
    #[error("expected exactly one tie-broken equilibrium, found {0}")]
    NotUnique(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeValue {
    pub t: u64,
    pub mover: Player,
    pub fights: bool,
    /// Continuation payoffs `(A, D)` of optimal play from this node.
    pub value: Payoffs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquilibriumResult {
    pub horizon: u64,
    pub profile: StrategyProfile,
    pub node_values: Vec<NodeValue>,
    pub root_outcome: TerminalOutcome,
    pub attack_occurs: bool,
}

impl EquilibriumResult {
    fn from_decisions(g: &GameParams, horizon: u64, fights: Vec<bool>, values: Vec<Payoffs>) -> Self {
        let quit_time = fights.iter().position(|f| !f).unwrap_or(fights.len()) as u64;
        let root_outcome = TerminalOutcome {
            quitter: Player::at(quit_time),
            time: quit_time,
            payoffs: quit_payoffs(g, quit_time),
        };
        let node_values = fights
            .iter()
            .zip(values)
            .enumerate()
            .map(|(t, (&f, value))| NodeValue {
                t: t as u64,
                mover: Player::at(t as u64),
                fights: f,
                value,
            })
            .collect();
        EquilibriumResult {
            horizon,
            attack_occurs: fights[0],
            profile: StrategyProfile::pure(&fights),
            node_values,
            root_outcome,
        }
    }
}

/// Solves the truncated game from `horizon` back to the root.
pub fn backward_induction(g: &GameParams) -> Result<EquilibriumResult, SolverError> {
    let horizon = truncation_horizon(g)?;
    let mut next = quit_payoffs(g, horizon + 1);
    let mut fights = vec![false; horizon as usize + 1];
    let mut values = vec![next.clone(); horizon as usize + 1];
    for t in (0..=horizon).rev() {
        let mover = Player::at(t);
        let quit = quit_payoffs(g, t);
        let fight = next.of(mover) > quit.of(mover);
        fights[t as usize] = fight;
        if !fight {
            next = quit;
        }
        values[t as usize] = next.clone();
    }
    Ok(EquilibriumResult::from_decisions(g, horizon, fights, values))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Deviation {
    pub t: u64,
    pub player: Player,
    #[serde(with = "num::decimal")]
    pub current_p: Q,
    #[serde(with = "num::decimal")]
    pub improving_p: Q,
    #[serde(with = "num::decimal")]
    pub gain: Q,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DeviationReport {
    pub deviations: Vec<Deviation>,
}

impl DeviationReport {
    pub fn is_spe(&self) -> bool {
        self.deviations.is_empty()
    }

    pub fn at(&self, player: Player) -> impl Iterator<Item = &Deviation> {
        self.deviations.iter().filter(move |d| d.player == player)
    }
}

/// Lists every node where the mover strictly gains by changing only its own
/// action there.
///
/// The mover's value at `t` is `p * fight + (1 - p) * quit`, affine in `p`,
/// so the best single-node replacement is always `p = 0` or `p = 1`; no
/// interior probability has to be tried.
pub fn one_deviation_check(
    g: &GameParams,
    profile: &StrategyProfile,
) -> Result<DeviationReport, SolverError> {
    let profile = profile.terminating()?;
    let horizon = truncation_horizon(g)?;
    let len = profile.len().max(horizon as usize + 1);
    let profile = profile.padded(len);
    let values = game::continuation_values(g, &profile, len);
    let mut deviations = Vec::new();
    for t in 0..len as u64 {
        let mover = Player::at(t);
        let current = values[t as usize].of(mover);
        let fight = values[t as usize + 1].of(mover);
        let quit = quit_payoffs(g, t);
        let quit = quit.of(mover);
        let (best, improving_p) = if fight > quit {
            (fight, Q::one())
        } else {
            (quit, Q::zero())
        };
        if best > current {
            deviations.push(Deviation {
                t,
                player: mover,
                current_p: profile.prob(t),
                improving_p,
                gain: best - current,
            });
        }
    }
    Ok(DeviationReport { deviations })
}

/// Exhaustive oracle: tries all `2^(horizon+1)` pure profiles and keeps the
/// one in which every mover's action is a best reply, ties going to quit.
pub fn brute_force_equilibrium(g: &GameParams, max_horizon: u64) -> Result<EquilibriumResult, SolverError> {
    let limit = max_horizon.min(BRUTE_FORCE_MAX_HORIZON);
    let horizon = truncation_horizon(g)?;
    if horizon > limit {
        return Err(SolverError::HorizonTooLarge { horizon, limit });
    }
    let n = horizon as usize + 1;
    let terminals: Vec<Payoffs> = (0..=n as u64)
        .map(|t| terminal_payoffs(g, Player::at(t), t))
        .collect::<Result<_, _>>()?;

    let mut found: Vec<(Vec<bool>, Vec<Payoffs>)> = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let fights: Vec<bool> = (0..n).map(|t| mask >> t & 1 == 1).collect();
        // first quit at or after t
        let mut stop = vec![n; n + 1];
        for t in (0..n).rev() {
            stop[t] = if fights[t] { stop[t + 1] } else { t };
        }
        let stable = (0..n).all(|t| {
            let mover = Player::at(t as u64);
            let fight_outcome = terminals[stop[t + 1]].of(mover);
            let quit_outcome = terminals[t].of(mover);
            match fight_outcome.cmp(quit_outcome) {
                Ordering::Greater => fights[t],
                Ordering::Less | Ordering::Equal => !fights[t],
            }
        });
        if stable {
            let values = (0..n).map(|t| terminals[stop[t]].clone()).collect();
            found.push((fights, values));
        }
    }
    if found.len() != 1 {
        return Err(SolverError::NotUnique(found.len()));
    }
    let (fights, values) = found.pop().expect("one equilibrium");
    Ok(EquilibriumResult::from_decisions(g, horizon, fights, values))
}

/// D has the last profitable move when `even_floor(T_A) < odd_floor(T_D)`.
pub fn last_profitable_mover(g: &GameParams) -> Result<Player, SolverError> {
    let b = g.break_even().map_err(GameError::from)?;
    let td = match &b.t_defender {
        DefenderTime::Unbounded => return Ok(Player::D),
        DefenderTime::Finite(td) => td,
    };
    let Ok(odd_d) = parity_floor(td, Parity::Odd) else {
        return Ok(Player::A);
    };
    let even_a = parity_floor(&b.t_attacker, Parity::Even).map_err(GameError::from)?;
    Ok(if even_a < odd_d { Player::D } else { Player::A })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReputationSafety {
    /// `r > gamma * v`; only defined for linear decay.
    pub linear_condition: Option<bool>,
    #[serde(serialize_with = "ser_opt_decimal")]
    pub linear_threshold: Option<Q>,
    /// `r > c - v * phi(phi^-1(c / v) + 1)`; `None` when a decay table skips
    /// `c / v`.
    pub general_condition: Option<bool>,
    pub general_threshold: Option<Real>,
    /// `phi^-1(c/v) + 1` ran past the point where linear decay hits 0.
    pub clamped: bool,
    pub d_last_mover: bool,
    pub note: Option<String>,
}

fn ser_opt_decimal<S: serde::Serializer>(x: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(x) => s.serialize_str(&num::format_decimal(x)),
        None => s.serialize_none(),
    }
}

/// Sufficient conditions for the defender to hold the last profitable move.
pub fn reputation_safety(g: &GameParams) -> Result<ReputationSafety, SolverError> {
    let (linear_condition, linear_threshold) = match &g.decay {
        DecayFn::Linear { gamma } => {
            let th = gamma * &g.v;
            (Some(g.r > th), Some(th))
        }
        _ => (None, None),
    };
    let d_last_mover = last_profitable_mover(g)? == Player::D;

    let y = Real::Exact(&g.c / &g.v);
    let (general_condition, general_threshold, clamped, note) = match g.decay.inverse(&y) {
        Ok(t0) => {
            let t1 = t0.add(&Real::Exact(Q::one()));
            let clamped = match &g.decay {
                DecayFn::Linear { gamma } => t1.cmp_tol(&Real::Exact(Q::one() / gamma)) == Ordering::Greater,
                _ => false,
            };
            let phi = g.decay.eval(&t1).map_err(GameError::from)?;
            let th = Real::Exact(g.c.clone()).sub(&Real::Exact(g.v.clone()).mul(&phi));
            let holds = Real::Exact(g.r.clone()).cmp_tol(&th) == Ordering::Greater;
            let note = clamped.then(|| "phi^-1(c/v)+1 is past the zero of phi; used phi = 0".to_string());
            (Some(holds), Some(th), clamped, note)
        }
        Err(e) => (None, None, false, Some(e.to_string())),
    };
    Ok(ReputationSafety {
        linear_condition,
        linear_threshold,
        general_condition,
        general_threshold,
        clamped,
        d_last_mover,
        note,
    })
}

/// Backward-induction equilibrium next to the literal no-attack profile and
/// the verifier's verdict on each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certification {
    pub equilibrium: EquilibriumResult,
    pub equilibrium_report: DeviationReport,
    pub paper_profile: StrategyProfile,
    pub paper_profile_report: DeviationReport,
    pub profiles_agree: bool,
}

pub fn certify(g: &GameParams) -> Result<Certification, SolverError> {
    let equilibrium = backward_induction(g)?;
    let equilibrium_report = one_deviation_check(g, &equilibrium.profile)?;
    let paper_profile = paper_spe_profile(g)?;
    let paper_profile_report = one_deviation_check(g, &paper_profile)?;
    let profiles_agree = paper_profile == equilibrium.profile;
    Ok(Certification {
        equilibrium,
        equilibrium_report,
        paper_profile,
        paper_profile_report,
        profiles_agree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{q, ratio};

    fn linear(v: i64, c: i64, r: i64, gamma: Q) -> GameParams {
        GameParams::new(q(v), q(c), q(r), DecayFn::linear(gamma).unwrap()).unwrap()
    }

    fn worked() -> GameParams {
        linear(10_000, 4000, 2000, ratio(1, 10))
    }

    #[test]
    fn worked_example_has_no_attack() {
        let g = worked();
        let bi = backward_induction(&g).unwrap();
        assert!(!bi.attack_occurs);
        assert_eq!(bi.root_outcome.payoffs, Payoffs::new(q(0), q(10_000)));
        assert_eq!(bi.root_outcome.quitter, Player::A);
        assert_eq!(bi.root_outcome.time, 0);
        assert_eq!(brute_force_equilibrium(&g, 14).unwrap(), bi);
    }

    #[test]
    fn cheap_attack_succeeds() {
        let g = linear(10_000, 8900, 200, ratio(1, 10));
        let bi = backward_induction(&g).unwrap();
        assert!(bi.attack_occurs);
        assert_eq!(bi.root_outcome.quitter, Player::D);
        assert_eq!(bi.root_outcome.time, 1);
        assert_eq!(bi.root_outcome.payoffs, Payoffs::new(q(100), q(-200)));
        assert_eq!(brute_force_equilibrium(&g, 14).unwrap(), bi);
    }

    #[test]
    fn attacker_with_no_profitable_window_stays_out() {
        let g = GameParams::new(
            q(10_000),
            ratio(999_999, 100),
            q(1),
            DecayFn::linear(q(1)).unwrap(),
        )
        .unwrap();
        let bi = backward_induction(&g).unwrap();
        assert!(!bi.attack_occurs);
        assert_eq!(bi.root_outcome.payoffs, Payoffs::new(q(0), q(10_000)));
    }

    #[test]
    fn horizon_one_oracle_follows_first_attack_margin() {
        // horizon 1 means T_A < 1, so phi(1) v - c < 0 and A stays out
        let g = GameParams::new(q(100), q(95), q(1), DecayFn::linear(ratio(1, 10)).unwrap()).unwrap();
        assert_eq!(truncation_horizon(&g).unwrap(), 1);
        assert!(g.decay.phi_at(1) * &g.v < g.c);
        let bf = brute_force_equilibrium(&g, 14).unwrap();
        assert!(!bf.attack_occurs);
        assert_eq!(bf, backward_induction(&g).unwrap());
    }

    #[test]
    fn deviation_examples() {
        let g = worked();
        let bi = backward_induction(&g).unwrap();
        assert!(one_deviation_check(&g, &bi.profile).unwrap().is_spe());

        let report = one_deviation_check(&g, &StrategyProfile::pure(&[true, false])).unwrap();
        let at1 = report
            .deviations
            .iter()
            .find(|d| d.t == 1)
            .expect("D deviates at t=1");
        assert_eq!(at1.player, Player::D);
        assert_eq!(at1.improving_p, q(1));
        assert_eq!(at1.gain, q(6000)); // 4000 - (-2000)

        let paper = paper_spe_profile(&g).unwrap();
        assert!(one_deviation_check(&g, &paper).unwrap().is_spe());
    }

    #[test]
    fn mixed_profile_deviation_is_reported_at_endpoint() {
        let g = worked();
        let p = StrategyProfile::new(vec![q(0), ratio(1, 2)]).unwrap();
        let report = one_deviation_check(&g, &p).unwrap();
        let at1 = report.deviations.iter().find(|d| d.t == 1).unwrap();
        assert_eq!(at1.current_p, ratio(1, 2));
        assert_eq!(at1.improving_p, q(1));
    }

    #[test]
    fn brute_force_rejects_long_horizons() {
        let g = linear(10_000, 1000, 2000, ratio(1, 20)); // T_A = 18
        assert!(matches!(
            brute_force_equilibrium(&g, 14),
            Err(SolverError::HorizonTooLarge { horizon: 19, .. })
        ));
    }

    #[test]
    fn last_mover_examples() {
        assert_eq!(last_profitable_mover(&worked()).unwrap(), Player::D);
        // T_A = 6.4, T_D = 6.6
        let g = linear(10_000, 3600, 200, ratio(1, 10));
        assert_eq!(last_profitable_mover(&g).unwrap(), Player::A);
        let g = linear(10_000, 4000, 5000, ratio(1, 10));
        assert_eq!(last_profitable_mover(&g).unwrap(), Player::D);
        // T_D < 1
        let g = GameParams::new(q(10_000), q(9999), q(1), DecayFn::linear(q(1)).unwrap()).unwrap();
        assert_eq!(last_profitable_mover(&g).unwrap(), Player::A);
    }

    #[test]
    fn reputation_examples() {
        let rs = reputation_safety(&linear(10_000, 4000, 1001, ratio(1, 10))).unwrap();
        assert_eq!(rs.linear_condition, Some(true));
        assert_eq!(rs.linear_threshold, Some(q(1000)));
        let rs = reputation_safety(&linear(10_000, 4000, 1000, ratio(1, 10))).unwrap();
        assert_eq!(rs.linear_condition, Some(false));
        let rs = reputation_safety(&worked()).unwrap();
        assert_eq!(rs.general_threshold, Some(Real::Exact(q(1000))));
        assert_eq!(rs.general_condition, Some(true));
        assert!(rs.d_last_mover);
        assert!(!rs.clamped);
    }

    #[test]
    fn reputation_condition_clamps_linear_decay() {
        // c/v = 0.05 -> phi^-1 = 9.5, +1 = 10.5 > 1/gamma = 10
        let rs = reputation_safety(&linear(10_000, 500, 400, ratio(1, 10))).unwrap();
        assert!(rs.clamped);
        assert_eq!(rs.general_threshold, Some(Real::Exact(q(500))));
        assert_eq!(rs.general_condition, Some(false));
    }

    #[test]
    fn reputation_for_other_families() {
        let g = GameParams::new(
            q(10_000),
            q(4000),
            q(500),
            DecayFn::geometric(ratio(1, 10)).unwrap(),
        )
        .unwrap();
        let rs = reputation_safety(&g).unwrap();
        assert_eq!(rs.linear_condition, None);
        // threshold = c - v * (c/v) * 0.9 = 400
        let th = rs.general_threshold.unwrap().to_f64();
        assert!((th - 400.0).abs() < 1e-6);
        assert_eq!(rs.general_condition, Some(true));

        let t = GameParams::new(
            q(100),
            q(50),
            q(10),
            DecayFn::table(vec![q(1), ratio(9, 10), ratio(7, 10), ratio(2, 10), q(0)]).unwrap(),
        )
        .unwrap();
        let rs = reputation_safety(&t).unwrap();
        assert_eq!(rs.general_condition, None);
        assert!(rs.note.is_some());
    }

    #[test]
    fn geometric_and_table_games_match_oracle() {
        let games = [
            GameParams::new(
                q(10_000),
                q(3000),
                q(500),
                DecayFn::geometric(ratio(1, 5)).unwrap(),
            )
            .unwrap(),
            GameParams::new(
                q(10_000),
                q(2000),
                q(9000),
                DecayFn::geometric(ratio(1, 4)).unwrap(),
            )
            .unwrap(),
            GameParams::new(
                q(100),
                q(50),
                q(10),
                DecayFn::table(vec![q(1), ratio(9, 10), ratio(7, 10), ratio(2, 10), q(0)]).unwrap(),
            )
            .unwrap(),
        ];
        for g in games {
            let bi = backward_induction(&g).unwrap();
            assert_eq!(brute_force_equilibrium(&g, 14).unwrap(), bi);
            assert!(one_deviation_check(&g, &bi.profile).unwrap().is_spe());
        }
    }

    #[test]
    fn non_terminating_profile_rejected() {
        let p = StrategyProfile::with_tail(vec![q(1)], crate::game::Tail::Fight).unwrap();
        assert!(matches!(
            one_deviation_check(&worked(), &p),
            Err(SolverError::Game(GameError::NonTerminating))
        ));
    }

    #[test]
    fn raising_reputation_never_invites_attack() {
        for c in (500..10_000).step_by(500) {
            let mut attacked = true;
            for r in (100..12_000).step_by(100) {
                let a = backward_induction(&linear(10_000, c, r, ratio(1, 10)))
                    .unwrap()
                    .attack_occurs;
                assert!(attacked || !a, "c={c} r={r}");
                attacked = a;
            }
        }
    }
}

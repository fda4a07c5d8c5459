//! `retaliate` command-line front end.
//!
//! Settings come from `--config <file>`, then environment variables named
//! `RETALIATE_<SECTION>_<KEY>` (for example `RETALIATE_GAME_R=1500`), then
//! flags. Data goes to standard output or `--out`; errors go to standard
//! error with exit code 2.

pub mod config;
pub mod plot;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use retaliate_core::decay::DecayFn;
use retaliate_core::econ::{self, AttackCostBreakdown, EconParams, SafeThreshold};
use retaliate_core::game::{self, GameParams, StrategyProfile};
use retaliate_core::ingest::{self, ReorgClass, ReorgEvent};
use retaliate_core::num::{self, Q};
use retaliate_core::sim::{self, SweepGrid};
use retaliate_core::solver;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use config::{Config, ConfigError};
use plot::XAxis;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn model<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Model(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "retaliate",
    version,
    about = "Double-spend attack costs, the Retaliation game, fork simulation and reorg log analysis",
    after_help = "Environment overrides: RETALIATE_<SECTION>_<KEY>, e.g. RETALIATE_GAME_R=1500.\n\
                  Precedence: config file < environment < flags. Exit code 2 on invalid input."
)]
pub struct Cli {
    /// Config file with [econ], [game], [sim] and [ingest] sections
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write output here instead of standard output
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Net cost and profitability of one majority double-spend attack
    Econ(EconArgs),
    /// Solve, verify or sweep the Retaliation game
    #[command(subcommand)]
    Game(GameCommand),
    /// Simulate attacks and retaliation episodes
    #[command(subcommand)]
    Sim(SimCommand),
    /// Classify and summarize reorg logs
    #[command(subcommand)]
    Reorg(ReorgCommand),
    /// Depth scatter data (CSV, optional SVG) for a reorg log
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct EconArgs {
    /// Block reward in USD (subsidy plus fees)
    #[arg(long, value_name = "USD")]
    pub pb: Option<String>,
    /// Cost per hash in USD
    #[arg(long, value_name = "USD")]
    pub ch: Option<String>,
    /// Honest hashpower per block (default: free entry, pb / ch)
    #[arg(long, value_name = "HASHES")]
    pub n: Option<String>,
    /// Rented hashpower as a multiple of the honest hashpower
    #[arg(long)]
    pub beta: Option<String>,
    /// Escrow period in blocks
    #[arg(long, value_name = "BLOCKS")]
    pub escrow: Option<u64>,
    /// Value of the double-spent transaction in USD
    #[arg(long, value_name = "USD")]
    pub tx_value: Option<String>,
    /// Market impact: a constant, linear(SLOPE) or table(BETA:KAPPA,...)
    #[arg(long)]
    pub kappa: Option<String>,
    /// Fractional price drop caused by the attack
    #[arg(long)]
    pub delta: Option<String>,
}

impl EconArgs {
    fn apply(&self, cfg: &mut Config) -> Result<(), ConfigError> {
        cfg.set_opt("econ", "block_reward", &self.pb)?;
        cfg.set_opt("econ", "hash_cost", &self.ch)?;
        cfg.set_opt("econ", "honest_hashpower", &self.n)?;
        cfg.set_opt("econ", "beta", &self.beta)?;
        cfg.set_opt("econ", "escrow", &self.escrow)?;
        cfg.set_opt("econ", "tx_value", &self.tx_value)?;
        cfg.set_opt("econ", "kappa", &self.kappa)?;
        cfg.set_opt("econ", "delta", &self.delta)
    }
}

#[derive(Debug, Args)]
pub struct GameArgs {
    /// Value at stake
    #[arg(long, value_name = "USD")]
    pub v: Option<String>,
    /// Cost of one attack or counterattack
    #[arg(long, value_name = "USD")]
    pub c: Option<String>,
    /// Reputation cost the defender pays on quitting
    #[arg(long, value_name = "USD")]
    pub r: Option<String>,
    /// Value decay: linear(G), geometric(D) or table(1,...)
    #[arg(long)]
    pub decay: Option<String>,
}

impl GameArgs {
    fn apply(&self, cfg: &mut Config) -> Result<(), ConfigError> {
        cfg.set_opt("game", "v", &self.v)?;
        cfg.set_opt("game", "c", &self.c)?;
        cfg.set_opt("game", "r", &self.r)?;
        cfg.set_opt("game", "decay", &self.decay)
    }
}

#[derive(Debug, Subcommand)]
pub enum GameCommand {
    /// Backward-induction equilibrium, break-even times and reputation conditions
    Solve(GameArgs),
    /// One-deviation check of a profile (default: the literal no-attack profile)
    Verify(VerifyArgs),
    /// Solve a grid of games and print CSV rows
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// Fight probabilities p_0,p_1,... (A moves at even indices)
    #[arg(long, value_name = "P0,P1,...")]
    pub profile: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Values at stake
    #[arg(long, value_delimiter = ',', required = true)]
    pub v: Vec<String>,
    /// Absolute attack costs
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "c_frac",
        required_unless_present = "c_frac"
    )]
    pub c: Vec<String>,
    /// Attack costs as fractions of v
    #[arg(long, value_delimiter = ',')]
    pub c_frac: Vec<String>,
    /// Reputation costs
    #[arg(long, value_delimiter = ',', required = true)]
    pub r: Vec<String>,
    /// Decay function; repeat the flag for several
    #[arg(long, required = true)]
    pub decay: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Stylized,
    Race,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BlockModelArg {
    Deterministic,
    Exponential,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub econ: EconArgs,
    #[command(flatten)]
    pub game: GameArgs,
    /// Stylized accounting or a block race
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Block arrival model (a seed implies exponential)
    #[arg(long, value_enum)]
    pub block_model: Option<BlockModelArg>,
    /// Seed for exponential block arrivals
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ticks per honest block for deterministic arrivals
    #[arg(long)]
    pub ticks_per_block: Option<u64>,
    /// Write the emitted reorg events as CSV to this file
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
}

impl SimArgs {
    fn apply(&self, cfg: &mut Config) -> Result<(), ConfigError> {
        self.econ.apply(cfg)?;
        self.game.apply(cfg)?;
        let mode = self.mode.map(|m| match m {
            ModeArg::Stylized => "stylized",
            ModeArg::Race => "race",
        });
        cfg.set_opt("sim", "mode", &mode)?;
        let model = self.block_model.map(|m| match m {
            BlockModelArg::Deterministic => "deterministic",
            BlockModelArg::Exponential => "exponential",
        });
        cfg.set_opt("sim", "block_model", &model)?;
        cfg.set_opt("sim", "seed", &self.seed)?;
        cfg.set_opt("sim", "ticks_per_honest_block", &self.ticks_per_block)
    }
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// Single double-spend attacks
    Attack(AttackArgs),
    /// One Retaliation game played move by move
    Retaliation(RetaliationArgs),
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Number of independent runs
    #[arg(long)]
    pub runs: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RetaliationArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Attacker fight probabilities by move (default: solved equilibrium)
    #[arg(long, value_name = "P0,P1,...")]
    pub sigma_a: Option<String>,
    /// Defender fight probabilities by move (default: solved equilibrium)
    #[arg(long, value_name = "P0,P1,...")]
    pub sigma_d: Option<String>,
    /// Random stream index
    #[arg(long, default_value_t = 0)]
    pub run_index: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct LogArgs {
    /// Reorg log file
    pub input: PathBuf,
    /// Log format (default: from the file extension)
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Minimum depth of a double-spend
    #[arg(long)]
    pub depth_threshold: Option<u64>,
    /// Require a conflicting spend for a double-spend
    #[arg(long, value_name = "BOOL")]
    pub require_conflict: Option<bool>,
}

impl LogArgs {
    fn apply(&self, cfg: &mut Config) -> Result<(), ConfigError> {
        let format = self.format.map(|f| match f {
            FormatArg::Csv => "csv",
            FormatArg::Json => "json",
        });
        cfg.set_opt("ingest", "format", &format)?;
        cfg.set_opt("ingest", "depth_threshold", &self.depth_threshold)?;
        cfg.set_opt("ingest", "require_conflict", &self.require_conflict)
    }
}

#[derive(Debug, Subcommand)]
pub enum ReorgCommand {
    /// Label each event and group retaliation episodes (JSON)
    Classify(ClassifyArgs),
    /// Per-chain double-spend counts and USD totals (CSV)
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub log: LogArgs,
    /// Longest gap between moves of one episode
    #[arg(long, value_name = "HOURS")]
    pub window_hours: Option<String>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub log: LogArgs,
    /// Gap that splits one chain's attacks into separate rows
    #[arg(long, value_name = "DAYS")]
    pub incident_gap_days: Option<String>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub log: LogArgs,
    /// Horizontal axis
    #[arg(long, value_enum, default_value = "height")]
    pub x: XAxis,
    /// Also render an SVG scatter plot to this file
    #[arg(long, value_name = "PATH")]
    pub svg: Option<PathBuf>,
}

/// Parses `argv`, runs the command and returns the exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_env(argv, std::env::vars(), stdout, stderr)
}

pub fn run_with_env<I, T, E>(argv: I, env: E, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    E: IntoIterator<Item = (String, String)>,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    match execute(&cli, env) {
        Ok(output) => match write_output(cli.out.as_deref(), &output, stdout) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                2
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

pub fn command() -> clap::Command {
    Cli::command()
}

fn write_output(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, text),
        None => stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Pretty JSON with keys in sorted order.
fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let v = serde_json::to_value(value).map_err(model)?;
    Ok(serde_json::to_string_pretty(&v).map_err(model)? + "\n")
}

fn load_config<E: IntoIterator<Item = (String, String)>>(cli: &Cli, env: E) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    cfg.apply_env(env)?;
    Ok(cfg)
}

fn execute<E: IntoIterator<Item = (String, String)>>(cli: &Cli, env: E) -> Result<String, CliError> {
    let mut cfg = load_config(cli, env)?;
    match &cli.command {
        Command::Econ(args) => {
            args.apply(&mut cfg)?;
            econ_report(&cfg.econ_params()?)
        }
        Command::Game(GameCommand::Solve(args)) => {
            args.apply(&mut cfg)?;
            game_solve(&cfg.game_params()?)
        }
        Command::Game(GameCommand::Verify(args)) => {
            args.game.apply(&mut cfg)?;
            let g = cfg.game_params()?;
            let profile = args.profile.as_deref().map(parse_profile).transpose()?;
            game_verify(&g, profile)
        }
        Command::Game(GameCommand::Sweep(args)) => game_sweep(args),
        Command::Sim(SimCommand::Attack(args)) => {
            args.sim.apply(&mut cfg)?;
            cfg.set_opt("sim", "runs", &args.runs)?;
            sim_attack(&cfg, args.sim.log.as_deref())
        }
        Command::Sim(SimCommand::Retaliation(args)) => {
            args.sim.apply(&mut cfg)?;
            sim_retaliation(&cfg, args)
        }
        Command::Reorg(ReorgCommand::Classify(args)) => {
            args.log.apply(&mut cfg)?;
            cfg.set_opt("ingest", "window_hours", &args.window_hours)?;
            reorg_classify(&cfg, &args.log.input)
        }
        Command::Reorg(ReorgCommand::Summarize(args)) => {
            args.log.apply(&mut cfg)?;
            cfg.set_opt("ingest", "incident_gap_days", &args.incident_gap_days)?;
            reorg_summarize(&cfg, &args.log.input)
        }
        Command::Plot(args) => {
            args.log.apply(&mut cfg)?;
            plot_log(&cfg, args)
        }
    }
}

#[derive(Serialize)]
struct EconReport<'a> {
    params: &'a EconParams,
    #[serde(flatten)]
    cost: AttackCostBreakdown,
    #[serde(with = "num::decimal")]
    kappa_at_beta: Q,
    #[serde(with = "num::decimal")]
    profit: Q,
    profitable: bool,
    safe_pb_threshold: SafeThreshold,
}

fn econ_report(p: &EconParams) -> Result<String, CliError> {
    let prof = econ::attack_profitability(p).map_err(model)?;
    to_json(&EconReport {
        params: p,
        cost: prof.cost,
        kappa_at_beta: p.kappa_at_beta(),
        profit: prof.profit,
        profitable: prof.profitable,
        safe_pb_threshold: prof.safe_pb_threshold,
    })
}

fn game_solve(g: &GameParams) -> Result<String, CliError> {
    let eq = solver::backward_induction(g).map_err(model)?;
    let break_even = g.break_even().map_err(model)?;
    let safety = solver::reputation_safety(g).map_err(model)?;
    let last = solver::last_profitable_mover(g).map_err(model)?;
    to_json(&json!({
        "params": g,
        "break_even": break_even,
        "attack_occurs": eq.attack_occurs,
        "equilibrium": eq,
        "last_profitable_mover": last,
        "reputation_safety": safety,
    }))
}

fn parse_profile(s: &str) -> Result<StrategyProfile, CliError> {
    let probs = s
        .split(',')
        .map(|p| num::parse_decimal(p.trim()).map_err(model))
        .collect::<Result<Vec<_>, _>>()?;
    StrategyProfile::new(probs).map_err(model)
}

fn game_verify(g: &GameParams, profile: Option<StrategyProfile>) -> Result<String, CliError> {
    let cert = solver::certify(g).map_err(model)?;
    match profile {
        Some(p) => {
            let report = solver::one_deviation_check(g, &p).map_err(model)?;
            let utilities = game::expected_utilities(g, &p).map_err(model)?;
            to_json(&json!({
                "profile": p,
                "is_spe": report.is_spe(),
                "deviations": report,
                "expected_utilities": utilities,
                "equilibrium_profile": cert.equilibrium.profile,
            }))
        }
        None => to_json(&json!({
            "profile": cert.paper_profile,
            "is_spe": cert.paper_profile_report.is_spe(),
            "deviations": cert.paper_profile_report,
            "equilibrium_profile": cert.equilibrium.profile,
            "equilibrium_deviations": cert.equilibrium_report,
            "profiles_agree": cert.profiles_agree,
        })),
    }
}

fn decimals(xs: &[String]) -> Result<Vec<Q>, CliError> {
    xs.iter()
        .map(|x| num::parse_decimal(x.trim()).map_err(model))
        .collect()
}

fn game_sweep(args: &SweepArgs) -> Result<String, CliError> {
    let c_relative = !args.c_frac.is_empty();
    let grid = SweepGrid {
        v: decimals(&args.v)?,
        c: decimals(if c_relative { &args.c_frac } else { &args.c })?,
        c_relative,
        r: decimals(&args.r)?,
        decay: args
            .decay
            .iter()
            .map(|d| d.parse::<DecayFn>().map_err(model))
            .collect::<Result<_, _>>()?,
    };
    let rows = sim::sweep(&grid).map_err(model)?;
    sim::sweep_csv(&rows).map_err(model)
}

fn sim_attack(cfg: &Config, log: Option<&Path>) -> Result<String, CliError> {
    let sc = cfg.sim_config()?;
    let runs = cfg.runs()?;
    if runs == 0 {
        return Err(CliError::Model("runs must be at least 1".into()));
    }
    let (summary, results) = sim::run_attack_batch(&sc, runs).map_err(model)?;
    if let Some(path) = log {
        let events: Vec<ReorgEvent> = results.iter().flat_map(|r| r.events.clone()).collect();
        write_file(path, &ingest::write_csv(&events).map_err(model)?)?;
    }
    if runs == 1 {
        to_json(&json!({ "config": sc, "result": results[0] }))
    } else {
        to_json(&json!({ "config": sc, "summary": summary }))
    }
}

fn sim_retaliation(cfg: &Config, args: &RetaliationArgs) -> Result<String, CliError> {
    let sc = cfg.sim_config()?;
    let solved = || {
        solver::backward_induction(&sc.game)
            .map(|eq| eq.profile)
            .map_err(model)
    };
    let sigma_a = match &args.sigma_a {
        Some(s) => parse_profile(s)?,
        None => solved()?,
    };
    let sigma_d = match &args.sigma_d {
        Some(s) => parse_profile(s)?,
        None => solved()?,
    };
    let result = sim::run_retaliation_episode(&sc, &sigma_a, &sigma_d, args.run_index).map_err(model)?;
    if let Some(path) = &args.sim.log {
        write_file(path, &ingest::write_csv(&result.events).map_err(model)?)?;
    }
    to_json(&json!({
        "config": sc,
        "sigma_a": sigma_a,
        "sigma_d": sigma_d,
        "result": result,
    }))
}

fn read_log(cfg: &Config, path: &Path) -> Result<(Vec<ReorgEvent>, Vec<ReorgClass>), CliError> {
    let format = cfg.log_format(path)?;
    let file = std::fs::File::open(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let events = ingest::parse_reorg_log(std::io::BufReader::new(file), format).map_err(model)?;
    let classes = ingest::classify_events(&events, cfg.classify_options()?).map_err(model)?;
    Ok((events, classes))
}

#[derive(Serialize)]
struct ClassifiedEvent<'a> {
    #[serde(flatten)]
    event: &'a ReorgEvent,
    class: ReorgClass,
}

fn reorg_classify(cfg: &Config, path: &Path) -> Result<String, CliError> {
    let (events, classes) = read_log(cfg, path)?;
    let episodes = ingest::group_retaliation_episodes(&events, &classes, cfg.window_secs()?);
    let labelled: Vec<ClassifiedEvent> = events
        .iter()
        .zip(&classes)
        .map(|(event, class)| ClassifiedEvent { event, class: *class })
        .collect();
    let double_spends = classes.iter().filter(|c| **c == ReorgClass::DoubleSpend).count();
    to_json(&json!({
        "options": {
            "depth_threshold": cfg.classify_options()?.depth_threshold,
            "require_conflict": cfg.classify_options()?.require_conflict,
            "window_secs": cfg.window_secs()?,
        },
        "counts": { "double_spend": double_spends, "random": classes.len() - double_spends },
        "events": labelled,
        "episodes": episodes,
    }))
}

fn reorg_summarize(cfg: &Config, path: &Path) -> Result<String, CliError> {
    let (events, classes) = read_log(cfg, path)?;
    let rows = ingest::summarize(&events, &classes, cfg.incident_gap_secs()?);
    ingest::summary_csv(&rows).map_err(model)
}

fn plot_log(cfg: &Config, args: &PlotArgs) -> Result<String, CliError> {
    let (events, classes) = read_log(cfg, &args.log.input)?;
    if let Some(svg) = &args.svg {
        write_file(
            svg,
            &plot::render_svg(&plot::plot_points(&events, &classes, args.x)),
        )?;
    }
    Ok(plot::emit_plot_data(&events, &classes, args.x))
}

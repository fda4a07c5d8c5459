use std::path::PathBuf;
use std::process::Command;

use retaliate_cli::{command, run_with_env};
use retaliate_core::ingest::{classify_events, parse_reorg_log, ClassifyOptions, LogFormat, ReorgClass};
use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .display()
        .to_string()
}

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn call_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("retaliate").chain(args.iter().copied());
    let env = env.iter().map(|(k, v)| (k.to_string(), v.to_string()));
    let code = run_with_env(argv, env, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn call(args: &[&str]) -> Output {
    call_env(args, &[])
}

fn json(o: &Output) -> Value {
    assert_eq!(o.code, 0, "stderr: {}", o.stderr);
    serde_json::from_str(&o.stdout).unwrap()
}

const ECON: &[&str] = &[
    "--pb",
    "100000",
    "--ch",
    "0.001",
    "--beta",
    "2",
    "--escrow",
    "6",
    "--tx-value",
    "50000",
];

#[test]
fn econ_reports_net_cost() {
    let mut args = vec!["econ"];
    args.extend_from_slice(ECON);
    args.extend_from_slice(&["--kappa", "0.1", "--delta", "0.05"]);
    let v = json(&call(&args));
    assert_eq!(v["net_cost"], "90000");
    assert_eq!(v["profitable"], false);
    assert_eq!(v["safe_pb_threshold"]["finite"], "55555.555555555556");
}

#[test]
fn game_solve_worked_example_has_no_attack() {
    let cfg = data("worked_example.conf");
    let v = json(&call(&["--config", &cfg, "game", "solve"]));
    assert_eq!(v["attack_occurs"], false);
    assert_eq!(
        v["equilibrium"]["root_outcome"]["payoffs"],
        serde_json::json!(["0", "10000"])
    );
    assert_eq!(v["reputation_safety"]["linear_threshold"], "1000");
}

#[test]
fn game_solve_attack_instance() {
    let v = json(&call(&[
        "game",
        "solve",
        "--v",
        "10000",
        "--c",
        "8900",
        "--r",
        "200",
        "--decay",
        "linear(0.1)",
    ]));
    assert_eq!(v["attack_occurs"], true);
    assert_eq!(
        v["equilibrium"]["root_outcome"]["payoffs"],
        serde_json::json!(["100", "-200"])
    );
}

#[test]
fn game_verify_flags_bad_profile() {
    let cfg = data("worked_example.conf");
    let v = json(&call(&["--config", &cfg, "game", "verify", "--profile", "1,0"]));
    assert_eq!(v["is_spe"], false);
    let v = json(&call(&["--config", &cfg, "game", "verify"]));
    assert_eq!(v["is_spe"], true);
}

#[test]
fn json_keys_are_sorted() {
    let cfg = data("worked_example.conf");
    let out = call(&["--config", &cfg, "game", "solve"]).stdout;
    let top: Vec<&str> = out
        .lines()
        .filter(|l| l.starts_with("  \""))
        .map(|l| l.trim().split('"').nth(1).unwrap())
        .collect();
    let mut sorted = top.clone();
    sorted.sort();
    assert_eq!(top, sorted);
}

#[test]
fn reorg_summarize_sample_log() {
    let out = call(&["reorg", "summarize", &data("reorgs_lcc_btg.csv")]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(
        out.stdout,
        "chain,first_date,last_date,attacks,usd\nBTG,2020-01-23,2020-01-24,2,70000\nLCC,2019-07-04,2019-07-07,6,50000\n"
    );
}

#[test]
fn reorg_classify_groups_episodes() {
    let v = json(&call(&["reorg", "classify", &data("reorgs_btg_feb2020.csv")]));
    assert_eq!(v["counts"]["double_spend"], 8);
    let lengths: Vec<u64> = v["episodes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["length"].as_u64().unwrap())
        .collect();
    assert_eq!(lengths, [4, 2, 2]);
    let v = json(&call(&[
        "reorg",
        "classify",
        &data("reorgs_btg_feb2020.csv"),
        "--window-hours",
        "1",
    ]));
    assert_eq!(v["episodes"].as_array().unwrap().len(), 8);
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = call(&["frobnicate"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("Usage"));
    assert!(out.stdout.is_empty());
}

#[test]
fn validation_errors_exit_2() {
    let out = call(&[
        "game",
        "solve",
        "--v",
        "100",
        "--c",
        "200",
        "--r",
        "1",
        "--decay",
        "linear(0.1)",
    ]);
    assert_eq!(out.code, 2);
    assert!(out.stdout.is_empty());
    assert!(out.stderr.starts_with("error:"));

    let out = call(&[
        "reorg",
        "classify",
        &data("reorgs_lcc_btg.csv"),
        "--depth-threshold",
        "1",
    ]);
    assert_eq!(out.code, 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "[game]\nvalue = 3\n").unwrap();
    let out = call(&["--config", bad.to_str().unwrap(), "game", "solve"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("unknown config key"));
}

#[test]
fn flags_beat_env_beat_file() {
    let cfg = data("worked_example.conf");
    let args = ["--config", cfg.as_str(), "game", "solve"];
    let v = json(&call_env(
        &args,
        &[("RETALIATE_GAME_R", "200"), ("RETALIATE_GAME_C", "8900")],
    ));
    assert_eq!(v["attack_occurs"], true);
    let mut with_flag = args.to_vec();
    with_flag.extend_from_slice(&["--r", "1001"]);
    let v = json(&call_env(
        &with_flag,
        &[("RETALIATE_GAME_R", "200"), ("RETALIATE_GAME_C", "8900")],
    ));
    assert_eq!(v["attack_occurs"], false);
    assert_eq!(call_env(&args, &[("RETALIATE_GAME_X", "1")]).code, 2);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let cfg = data("worked_example.conf");
    let args = [
        "--config",
        cfg.as_str(),
        "sim",
        "attack",
        "--mode",
        "race",
        "--seed",
        "42",
        "--runs",
        "50",
    ];
    let a = call(&args);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(a.stdout, call(&args).stdout);

    let sweep = [
        "game",
        "sweep",
        "--v",
        "1000,10000",
        "--c-frac",
        "0.4,0.89",
        "--r",
        "200,1001",
        "--decay",
        "linear(0.1)",
        "--decay",
        "geometric(0.05)",
    ];
    let s = call(&sweep);
    assert_eq!(s.code, 0, "{}", s.stderr);
    assert_eq!(s.stdout.lines().count(), 1 + 16);
    assert_eq!(s.stdout, call(&sweep).stdout);
}

#[test]
fn sim_log_feeds_plot_and_classifier() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data("worked_example.conf");
    let log = dir.path().join("sim.csv");
    let out = call(&[
        "--config",
        &cfg,
        "sim",
        "retaliation",
        "--sigma-a",
        "1,0,1",
        "--sigma-d",
        "0,1,0,1",
        "--log",
        log.to_str().unwrap(),
    ]);
    let v = json(&out);
    assert_eq!(v["result"]["events"].as_array().unwrap().len(), 4);

    // mix the simulated reorgs with shallow noise
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.push_str("SIM,1577840000,1000003,1,2,false,0,\nSIM,1577850000,1000012,2,3,false,0,\n");
    let mixed = dir.path().join("mixed.csv");
    std::fs::write(&mixed, &text).unwrap();

    let plot_out = dir.path().join("plot.csv");
    let svg = dir.path().join("plot.svg");
    let out = call(&[
        "plot",
        mixed.to_str().unwrap(),
        "--depth-threshold",
        "5",
        "--svg",
        svg.to_str().unwrap(),
        "--out",
        plot_out.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(&plot_out).unwrap();

    let events = parse_reorg_log(text.as_bytes(), LogFormat::Csv).unwrap();
    let opts = ClassifyOptions {
        depth_threshold: 5,
        require_conflict: true,
    };
    let classes = classify_events(&events, opts).unwrap();
    let ds = classes.iter().filter(|c| **c == ReorgClass::DoubleSpend).count();
    assert_eq!(csv.matches(",DoubleSpend").count(), ds);
    assert_eq!(csv.matches(",Random").count(), classes.len() - ds);
    assert_eq!(ds, 4);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<circle"));
}

#[test]
fn help_mentions_every_flag() {
    fn walk(cmd: &mut clap::Command, path: String, missing: &mut Vec<String>, seen: &mut usize) {
        let help = cmd.render_long_help().to_string();
        *seen += 1;
        for arg in cmd.get_arguments() {
            if let Some(long) = arg.get_long() {
                if !help.contains(&format!("--{long}")) {
                    missing.push(format!("{path}: --{long}"));
                }
                let documented = arg.get_help().is_some() || matches!(long, "help" | "version");
                if !documented {
                    missing.push(format!("{path}: --{long} has no description"));
                }
            }
        }
        for sub in cmd.get_subcommands_mut() {
            let name = format!("{path} {}", sub.get_name());
            walk(sub, name, missing, seen);
        }
    }
    let mut missing = Vec::new();
    let mut seen = 0;
    let mut cmd = command();
    cmd.build();
    walk(&mut cmd, "retaliate".into(), &mut missing, &mut seen);
    assert!(missing.is_empty(), "{missing:?}");
    assert!(seen >= 12);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_retaliate");
    let ok = Command::new(bin)
        .args(["game", "sweep", "--help"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("--c-frac"));
    let bad = Command::new(bin).arg("nope").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

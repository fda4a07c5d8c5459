//! Layered settings: config file, then `RETALIATE_<SECTION>_<KEY>`
//! environment variables, then command-line flags.
//!
//! The file format is line based:
//!
//! ```text
//! # comment
//! [game]
//! v = 10000
//! decay = linear(0.1)
//! ```
//!
//! Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use retaliate_core::decay::DecayFn;
use retaliate_core::econ::{EconParams, MarketImpactFn};
use retaliate_core::game::GameParams;
use retaliate_core::ingest::{ClassifyOptions, LogFormat};
use retaliate_core::num::{self, Q};
use retaliate_core::sim::{BlockModel, LogLabels, SimConfig, SimMode};
use thiserror::Error;

pub const ENV_PREFIX: &str = "RETALIATE_";

pub const SCHEMA: &[(&str, &[&str])] = &[
    (
        "econ",
        &[
            "block_reward",
            "hash_cost",
            "honest_hashpower",
            "beta",
            "escrow",
            "tx_value",
            "kappa",
            "delta",
        ],
    ),
    ("game", &["v", "c", "r", "decay"]),
    (
        "sim",
        &[
            "mode",
            "block_model",
            "seed",
            "runs",
            "ticks_per_honest_block",
            "chain",
            "fork_height",
            "start_timestamp",
            "block_interval_secs",
        ],
    ),
    (
        "ingest",
        &[
            "depth_threshold",
            "require_conflict",
            "window_hours",
            "incident_gap_days",
            "format",
        ],
    ),
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config section `{0}`")]
    UnknownSection(String),
    #[error("unknown config key `{section}.{key}`")]
    UnknownKey { section: String, key: String },
    #[error("unknown environment override `{0}`")]
    UnknownEnv(String),
    #[error("missing required setting `{section}.{key}`")]
    Missing {
        section: &'static str,
        key: &'static str,
    },
    #[error("invalid `{section}.{key}` = `{value}`: {message}")]
    Invalid {
        section: &'static str,
        key: &'static str,
        value: String,
        message: String,
    },
    #[error("{0}")]
    Model(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn known(section: &str, key: &str) -> Result<(), ConfigError> {
    let keys = SCHEMA
        .iter()
        .find(|(s, _)| *s == section)
        .map(|(_, k)| *k)
        .ok_or_else(|| ConfigError::UnknownSection(section.to_string()))?;
    if keys.contains(&key) {
        Ok(())
    } else {
        Err(ConfigError::UnknownKey {
            section: section.to_string(),
            key: key.to_string(),
        })
    }
}

fn required<T>(section: &'static str, key: &'static str, v: Option<T>) -> Result<T, ConfigError> {
    v.ok_or(ConfigError::Missing { section, key })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<(String, String), String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: &str| ConfigError::Syntax {
                line: i + 1,
                message: message.to_string(),
            };
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| syntax("unterminated section header"))?;
                let name = name.trim().to_string();
                if !SCHEMA.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::UnknownSection(name));
                }
                section = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax("expected `key = value`"))?;
            let section = section
                .as_deref()
                .ok_or_else(|| syntax("setting outside a section"))?;
            cfg.set(section, key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies every `RETALIATE_<SECTION>_<KEY>` variable.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(
        &mut self,
        vars: I,
    ) -> Result<(), ConfigError> {
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let rest = rest.to_ascii_lowercase();
            let hit = SCHEMA.iter().find_map(|(section, _)| {
                rest.strip_prefix(section)
                    .and_then(|k| k.strip_prefix('_'))
                    .map(|k| (*section, k.to_string()))
            });
            match hit {
                Some((section, key)) if known(section, &key).is_ok() => self.set(section, &key, &value)?,
                _ => return Err(ConfigError::UnknownEnv(name)),
            }
        }
        Ok(())
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        known(section, key)?;
        self.values
            .insert((section.to_string(), key.to_string()), value.to_string());
        Ok(())
    }

    /// Flag override; `None` leaves the current value.
    pub fn set_opt<T: ToString>(
        &mut self,
        section: &str,
        key: &str,
        value: &Option<T>,
    ) -> Result<(), ConfigError> {
        match value {
            Some(v) => self.set(section, key, &v.to_string()),
            None => Ok(()),
        }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .map(String::as_str)
    }

    fn parsed<T, E: ToString>(
        &self,
        section: &'static str,
        key: &'static str,
        parse: impl Fn(&str) -> Result<T, E>,
    ) -> Result<Option<T>, ConfigError> {
        self.get(section, key)
            .map(|v| {
                parse(v).map_err(|e| ConfigError::Invalid {
                    section,
                    key,
                    value: v.to_string(),
                    message: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn decimal(&self, section: &'static str, key: &'static str) -> Result<Option<Q>, ConfigError> {
        self.parsed(section, key, num::parse_decimal)
    }

    pub fn value<T: FromStr>(
        &self,
        section: &'static str,
        key: &'static str,
    ) -> Result<Option<T>, ConfigError>
    where
        T::Err: ToString,
    {
        self.parsed(section, key, T::from_str)
    }

    pub fn flag(&self, section: &'static str, key: &'static str) -> Result<Option<bool>, ConfigError> {
        self.parsed(section, key, |s| match s.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err("expected true or false"),
        })
    }

    pub fn econ_params(&self) -> Result<EconParams, ConfigError> {
        let pb = required("econ", "block_reward", self.decimal("econ", "block_reward")?)?;
        let ch = required("econ", "hash_cost", self.decimal("econ", "hash_cost")?)?;
        let beta = required("econ", "beta", self.decimal("econ", "beta")?)?;
        let escrow = self.value::<u64>("econ", "escrow")?.unwrap_or(6);
        let tx_value = required("econ", "tx_value", self.decimal("econ", "tx_value")?)?;
        let kappa = self
            .parsed("econ", "kappa", MarketImpactFn::from_str)?
            .unwrap_or_else(MarketImpactFn::zero);
        let delta = self.decimal("econ", "delta")?.unwrap_or_default();
        let model = |e: retaliate_core::econ::EconError| ConfigError::Model(e.to_string());
        let mut p =
            EconParams::with_free_entry(pb, ch, beta, escrow, tx_value, kappa, delta).map_err(model)?;
        if let Some(n) = self.decimal("econ", "honest_hashpower")? {
            p.honest_hashpower = n;
            p.validate().map_err(model)?;
        }
        Ok(p)
    }

    pub fn game_params(&self) -> Result<GameParams, ConfigError> {
        let v = required("game", "v", self.decimal("game", "v")?)?;
        let c = required("game", "c", self.decimal("game", "c")?)?;
        let r = required("game", "r", self.decimal("game", "r")?)?;
        let decay = required("game", "decay", self.parsed("game", "decay", DecayFn::from_str)?)?;
        GameParams::new(v, c, r, decay).map_err(|e| ConfigError::Model(e.to_string()))
    }

    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        let econ = self.econ_params()?;
        let game = self.game_params()?;
        let mode = match self.get("sim", "mode").unwrap_or("stylized") {
            "stylized" => SimMode::Stylized,
            "race" => SimMode::Race,
            other => {
                return Err(ConfigError::Invalid {
                    section: "sim",
                    key: "mode",
                    value: other.into(),
                    message: "expected stylized or race".into(),
                })
            }
        };
        let seed = self.value::<u64>("sim", "seed")?;
        let default_model = if seed.is_some() {
            "exponential"
        } else {
            "deterministic"
        };
        let block_model = match self.get("sim", "block_model").unwrap_or(default_model) {
            "deterministic" if seed.is_some() => {
                return Err(ConfigError::Invalid {
                    section: "sim",
                    key: "block_model",
                    value: "deterministic".into(),
                    message: "a seed only applies to exponential arrivals".into(),
                })
            }
            "deterministic" => BlockModel::Deterministic,
            "exponential" => BlockModel::Exponential {
                seed: required("sim", "seed", seed)?,
            },
            other => {
                return Err(ConfigError::Invalid {
                    section: "sim",
                    key: "block_model",
                    value: other.into(),
                    message: "expected deterministic or exponential".into(),
                })
            }
        };
        let mut cfg = SimConfig::new(econ, game, block_model, mode);
        if let Some(t) = self.value("sim", "ticks_per_honest_block")? {
            cfg.ticks_per_honest_block = t;
        }
        let d = LogLabels::default();
        cfg.labels = LogLabels {
            chain: self.get("sim", "chain").map_or(d.chain, str::to_string),
            fork_height: self.value("sim", "fork_height")?.unwrap_or(d.fork_height),
            start_timestamp: self.value("sim", "start_timestamp")?.unwrap_or(d.start_timestamp),
            block_interval_secs: self
                .value("sim", "block_interval_secs")?
                .unwrap_or(d.block_interval_secs),
            ..d
        };
        Ok(cfg)
    }

    pub fn runs(&self) -> Result<u64, ConfigError> {
        Ok(self.value("sim", "runs")?.unwrap_or(1))
    }

    pub fn classify_options(&self) -> Result<ClassifyOptions, ConfigError> {
        let d = ClassifyOptions::default();
        Ok(ClassifyOptions {
            depth_threshold: self
                .value("ingest", "depth_threshold")?
                .unwrap_or(d.depth_threshold),
            require_conflict: self
                .flag("ingest", "require_conflict")?
                .unwrap_or(d.require_conflict),
        })
    }

    pub fn window_secs(&self) -> Result<i64, ConfigError> {
        let hours = self
            .decimal("ingest", "window_hours")?
            .unwrap_or_else(|| num::q(48));
        Ok(num::floor_i64(&(hours * num::q(3600))))
    }

    pub fn incident_gap_secs(&self) -> Result<i64, ConfigError> {
        let days = self
            .decimal("ingest", "incident_gap_days")?
            .unwrap_or_else(|| num::q(7));
        Ok(num::floor_i64(&(days * num::q(86_400))))
    }

    /// Explicit format, else guessed from the file extension.
    pub fn log_format(&self, path: &Path) -> Result<LogFormat, ConfigError> {
        let by_ext = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => "json",
            _ => "csv",
        };
        match self.get("ingest", "format").unwrap_or(by_ext) {
            "csv" => Ok(LogFormat::Csv),
            "json" => Ok(LogFormat::Json),
            other => Err(ConfigError::Invalid {
                section: "ingest",
                key: "format",
                value: other.into(),
                message: "expected csv or json".into(),
            }),
        }
    }
}

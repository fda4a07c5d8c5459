//! Reorg event logs: parsing, random-vs-double-spend classification,
//! retaliation episode grouping and per-chain summaries.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::{DateTime, NaiveDate, Utc};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{self, Q};

pub const CSV_HEADER: [&str; 8] = [
    "chain",
    "timestamp",
    "height",
    "depth",
    "blocks_added",
    "conflicting_spend",
    "value_usd",
    "beneficiary",
];

pub const DEFAULT_DEPTH_THRESHOLD: u64 = 10;
pub const DEFAULT_WINDOW_SECS: i64 = 48 * 3600;
pub const DEFAULT_INCIDENT_GAP_SECS: i64 = 7 * 24 * 3600;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("row {row}, column {column} ({name}): {message}")]
    Field {
        row: usize,
        column: usize,
        name: &'static str,
        message: String,
    },
    #[error("header mismatch at column {column}: expected `{expected}`, found `{found}`")]
    Header {
        column: usize,
        expected: &'static str,
        found: String,
    },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("depth threshold must be at least 2 (got {0})")]
    Threshold(u64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Csv,
    Json,
}

/// One observed chain reorganization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReorgEvent {
    #[serde(rename = "chain")]
    pub chain_id: String,
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    pub height: u64,
    /// Blocks removed from the canonical chain.
    pub depth: u64,
    pub blocks_added: u64,
    pub conflicting_spend: bool,
    #[serde(with = "num::decimal")]
    pub value_usd: Q,
    pub beneficiary: Option<String>,
}

impl ReorgEvent {
    pub fn validate(&self) -> Result<(), String> {
        if self.chain_id.is_empty() {
            return Err("chain must not be empty".into());
        }
        if self.depth == 0 {
            return Err("depth must be at least 1".into());
        }
        if self.blocks_added < self.depth {
            return Err(format!(
                "blocks_added ({}) must be at least depth ({})",
                self.blocks_added, self.depth
            ));
        }
        if self.value_usd.is_negative() {
            return Err("value_usd must be >= 0".into());
        }
        if self.value_usd.is_positive() && !self.conflicting_spend {
            return Err("value_usd > 0 requires conflicting_spend".into());
        }
        Ok(())
    }
}

pub fn parse_reorg_log<R: Read>(input: R, format: LogFormat) -> Result<Vec<ReorgEvent>, IngestError> {
    match format {
        LogFormat::Csv => parse_csv(input),
        LogFormat::Json => parse_json(input),
    }
}

fn field_err(row: usize, column: usize, message: impl Into<String>) -> IngestError {
    IngestError::Field {
        row,
        column: column + 1,
        name: CSV_HEADER[column],
        message: message.into(),
    }
}

fn parse_csv<R: Read>(input: R) -> Result<Vec<ReorgEvent>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    for (i, expected) in CSV_HEADER.iter().enumerate() {
        let found = header.get(i).unwrap_or("").trim();
        if found != *expected {
            return Err(IngestError::Header {
                column: i + 1,
                expected,
                found: found.to_string(),
            });
        }
    }
    if header.len() > CSV_HEADER.len() {
        return Err(IngestError::Header {
            column: CSV_HEADER.len() + 1,
            expected: "end of header",
            found: header[CSV_HEADER.len()].to_string(),
        });
    }
    let mut events = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != CSV_HEADER.len() {
            return Err(IngestError::Row {
                row,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), record.len()),
            });
        }
        let f = |c: usize| record[c].trim();
        let event = ReorgEvent {
            chain_id: f(0).to_string(),
            timestamp: parse_timestamp(f(1)).map_err(|m| field_err(row, 1, m))?,
            height: parse_count(f(2)).map_err(|m| field_err(row, 2, m))?,
            depth: parse_count(f(3)).map_err(|m| field_err(row, 3, m))?,
            blocks_added: parse_count(f(4)).map_err(|m| field_err(row, 4, m))?,
            conflicting_spend: parse_bool(f(5)).map_err(|m| field_err(row, 5, m))?,
            value_usd: num::parse_decimal(f(6)).map_err(|e| field_err(row, 6, e.to_string()))?,
            beneficiary: Some(f(7)).filter(|s| !s.is_empty()).map(str::to_string),
        };
        event
            .validate()
            .map_err(|message| IngestError::Row { row, message })?;
        events.push(event);
    }
    Ok(events)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Scalar {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
}

impl Scalar {
    fn text(&self) -> String {
        match self {
            Scalar::Int(i) => i.to_string(),
            Scalar::Float(f) => f.to_string(),
            Scalar::Bool(b) => b.to_string(),
            Scalar::Str(s) => s.clone(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    chain: String,
    timestamp: Scalar,
    height: Scalar,
    depth: Scalar,
    blocks_added: Scalar,
    conflicting_spend: Scalar,
    value_usd: Scalar,
    #[serde(default)]
    beneficiary: Option<String>,
}

fn parse_json<R: Read>(input: R) -> Result<Vec<ReorgEvent>, IngestError> {
    let raw: Vec<RawEvent> = serde_json::from_reader(input)?;
    raw.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 1;
            let event = ReorgEvent {
                chain_id: r.chain,
                timestamp: parse_timestamp(&r.timestamp.text()).map_err(|m| field_err(row, 1, m))?,
                height: parse_count(&r.height.text()).map_err(|m| field_err(row, 2, m))?,
                depth: parse_count(&r.depth.text()).map_err(|m| field_err(row, 3, m))?,
                blocks_added: parse_count(&r.blocks_added.text()).map_err(|m| field_err(row, 4, m))?,
                conflicting_spend: parse_bool(&r.conflicting_spend.text())
                    .map_err(|m| field_err(row, 5, m))?,
                value_usd: num::parse_decimal(&r.value_usd.text())
                    .map_err(|e| field_err(row, 6, e.to_string()))?,
                beneficiary: r.beneficiary.filter(|s| !s.is_empty()),
            };
            event
                .validate()
                .map_err(|message| IngestError::Row { row, message })?;
            Ok(event)
        })
        .collect()
}

/// Integer epoch seconds, RFC 3339 (any offset) or a bare `YYYY-MM-DD` date.
pub fn parse_timestamp(s: &str) -> Result<i64, String> {
    if let Ok(secs) = s.parse::<i64>() {
        return Ok(secs);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc).timestamp());
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp());
    }
    Err(format!("unrecognized timestamp `{s}`"))
}

fn parse_count(s: &str) -> Result<u64, String> {
    match s.parse::<i64>() {
        Ok(n) if n < 0 => Err(format!("negative value {n}")),
        Ok(n) => Ok(n as u64),
        Err(_) => Err(format!("not an integer: `{s}`")),
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("not a boolean: `{s}`")),
    }
}

pub fn format_date(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .map(|d| d.format("%Y-%m-%d").to_string())
        .unwrap_or_else(|| ts.to_string())
}

/// Serializes events in the CSV log schema.
pub fn write_csv(events: &[ReorgEvent]) -> Result<String, IngestError> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for e in events {
        w.write_record([
            e.chain_id.clone(),
            e.timestamp.to_string(),
            e.height.to_string(),
            e.depth.to_string(),
            e.blocks_added.to_string(),
            e.conflicting_spend.to_string(),
            num::format_decimal(&e.value_usd),
            e.beneficiary.clone().unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ReorgClass {
    Random,
    DoubleSpend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifyOptions {
    pub depth_threshold: u64,
    pub require_conflict: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            depth_threshold: DEFAULT_DEPTH_THRESHOLD,
            require_conflict: true,
        }
    }
}

/// Deep reorgs (optionally carrying a conflicting spend) are double-spends;
/// everything else is a random reorg.
pub fn classify_events(events: &[ReorgEvent], opts: ClassifyOptions) -> Result<Vec<ReorgClass>, IngestError> {
    if opts.depth_threshold < 2 {
        return Err(IngestError::Threshold(opts.depth_threshold));
    }
    Ok(events
        .iter()
        .map(|e| {
            if e.depth >= opts.depth_threshold && (e.conflicting_spend || !opts.require_conflict) {
                ReorgClass::DoubleSpend
            } else {
                ReorgClass::Random
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpisodeKind {
    SingleAttack,
    Retaliation { moves: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Episode {
    pub chain: String,
    pub length: usize,
    pub classification: EpisodeKind,
    /// False when some consecutive pair lacked beneficiary tags.
    pub alternation_verified: bool,
    pub events: Vec<ReorgEvent>,
}

/// Merges consecutive double-spends on one chain whose gap is within
/// `window_secs` and whose beneficiaries alternate where tagged.
pub fn group_retaliation_episodes(
    events: &[ReorgEvent],
    classes: &[ReorgClass],
    window_secs: i64,
) -> Vec<Episode> {
    let mut attacks: Vec<&ReorgEvent> = events
        .iter()
        .zip(classes)
        .filter(|(_, c)| **c == ReorgClass::DoubleSpend)
        .map(|(e, _)| e)
        .collect();
    attacks.sort_by(|a, b| (&a.chain_id, a.timestamp).cmp(&(&b.chain_id, b.timestamp)));

    let mut episodes: Vec<Episode> = Vec::new();
    for e in attacks {
        let joined = episodes.last_mut().is_some_and(|ep| {
            let prev = ep.events.last().expect("episodes are non-empty");
            if prev.chain_id != e.chain_id || e.timestamp - prev.timestamp > window_secs {
                return false;
            }
            match (&prev.beneficiary, &e.beneficiary) {
                (Some(a), Some(b)) if a == b => false,
                (Some(_), Some(_)) => {
                    ep.events.push(e.clone());
                    true
                }
                _ => {
                    ep.alternation_verified = false;
                    ep.events.push(e.clone());
                    true
                }
            }
        });
        if !joined {
            episodes.push(Episode {
                chain: e.chain_id.clone(),
                length: 0,
                classification: EpisodeKind::SingleAttack,
                alternation_verified: true,
                events: vec![e.clone()],
            });
        }
    }
    for ep in &mut episodes {
        ep.length = ep.events.len();
        ep.classification = if ep.length == 1 {
            EpisodeKind::SingleAttack
        } else {
            EpisodeKind::Retaliation { moves: ep.length }
        };
    }
    episodes
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainSummary {
    pub chain: String,
    pub first_date: String,
    pub last_date: String,
    pub attacks: usize,
    #[serde(with = "num::decimal")]
    pub total_usd: Q,
}

/// Per-chain double-spend counts and USD totals. Attacks on one chain more
/// than `incident_gap_secs` apart start a new row, ordered by chain then date.
pub fn summarize(events: &[ReorgEvent], classes: &[ReorgClass], incident_gap_secs: i64) -> Vec<ChainSummary> {
    let mut by_chain: BTreeMap<&str, Vec<&ReorgEvent>> = BTreeMap::new();
    for (e, c) in events.iter().zip(classes) {
        if *c == ReorgClass::DoubleSpend {
            by_chain.entry(e.chain_id.as_str()).or_default().push(e);
        }
    }
    let mut rows = Vec::new();
    for (chain, mut list) in by_chain {
        list.sort_by_key(|e| e.timestamp);
        let mut start = 0;
        for i in 1..=list.len() {
            let split = i == list.len() || list[i].timestamp - list[i - 1].timestamp > incident_gap_secs;
            if split {
                let group = &list[start..i];
                rows.push(ChainSummary {
                    chain: chain.to_string(),
                    first_date: format_date(group[0].timestamp),
                    last_date: format_date(group[group.len() - 1].timestamp),
                    attacks: group.len(),
                    total_usd: group.iter().fold(Q::zero(), |acc, e| acc + &e.value_usd),
                });
                start = i;
            }
        }
    }
    rows
}

pub fn summary_csv(rows: &[ChainSummary]) -> Result<String, IngestError> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["chain", "first_date", "last_date", "attacks", "usd"])?;
    for r in rows {
        w.write_record([
            r.chain.clone(),
            r.first_date.clone(),
            r.last_date.clone(),
            r.attacks.to_string(),
            num::format_decimal(&r.total_usd),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::q;
    use proptest::prelude::*;

    const HEADER: &str =
        "chain,timestamp,height,depth,blocks_added,conflicting_spend,value_usd,beneficiary\n";

    fn ev(chain: &str, ts: i64, depth: u64, conflict: bool, usd: i64, who: Option<&str>) -> ReorgEvent {
        ReorgEvent {
            chain_id: chain.into(),
            timestamp: ts,
            height: 1000 + ts as u64 % 1000,
            depth,
            blocks_added: depth + 1,
            conflicting_spend: conflict,
            value_usd: q(usd),
            beneficiary: who.map(str::to_string),
        }
    }

    #[test]
    fn parses_empty_and_single_row() {
        assert!(parse_reorg_log(HEADER.as_bytes(), LogFormat::Csv)
            .unwrap()
            .is_empty());
        let one = format!("{HEADER}LCC,1562198400,100,2,3,false,0,\n");
        let events = parse_reorg_log(one.as_bytes(), LogFormat::Csv).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].depth, 2);
        assert_eq!(events[0].beneficiary, None);
    }

    #[test]
    fn rejects_bad_rows_with_position() {
        let bad = format!("{HEADER}LCC,1,100,2,3,false,0,\nLCC,2,100,0,3,false,0,\n");
        match parse_reorg_log(bad.as_bytes(), LogFormat::Csv) {
            Err(IngestError::Row { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        let neg = format!("{HEADER}LCC,1,100,-3,3,false,0,\n");
        match parse_reorg_log(neg.as_bytes(), LogFormat::Csv) {
            Err(IngestError::Field { row, column, .. }) => assert_eq!((row, column), (1, 4)),
            other => panic!("unexpected {other:?}"),
        }
        let header = "chain,time,height,depth,blocks_added,conflicting_spend,value_usd,beneficiary\n";
        assert!(matches!(
            parse_reorg_log(header.as_bytes(), LogFormat::Csv),
            Err(IngestError::Header { column: 2, .. })
        ));
        let unflagged = format!("{HEADER}LCC,1,100,50,51,false,10,\n");
        assert!(parse_reorg_log(unflagged.as_bytes(), LogFormat::Csv).is_err());
    }

    #[test]
    fn normalizes_timestamps_to_utc() {
        assert_eq!(
            parse_timestamp("2019-07-04T02:00:00+02:00").unwrap(),
            1_562_198_400
        );
        assert_eq!(parse_timestamp("2019-07-04T00:00:00Z").unwrap(), 1_562_198_400);
        assert_eq!(parse_timestamp("2019-07-04").unwrap(), 1_562_198_400);
        assert!(parse_timestamp("yesterday").is_err());
    }

    #[test]
    fn parses_json() {
        let json = r#"[{"chain":"BTG","timestamp":"2020-01-23T10:00:00Z","height":5,"depth":15,
            "blocks_added":16,"conflicting_spend":true,"value_usd":"35000","beneficiary":"x"}]"#;
        let events = parse_reorg_log(json.as_bytes(), LogFormat::Json).unwrap();
        assert_eq!(events[0].value_usd, q(35_000));
        assert_eq!(events[0].timestamp, 1_579_773_600);
        let bad = r#"[{"chain":"BTG","timestamp":1,"height":5,"depth":0,"blocks_added":1,"conflicting_spend":false,"value_usd":0}]"#;
        assert!(parse_reorg_log(bad.as_bytes(), LogFormat::Json).is_err());
    }

    #[test]
    fn classification_examples() {
        let opts = ClassifyOptions::default();
        let events = [
            ev("LCC", 0, 2, false, 0, None),
            ev("LCC", 1, 60, true, 1, None),
            ev("BTG", 2, 15, true, 1, None),
            ev("BTG", 3, 15, false, 0, None),
        ];
        let c = classify_events(&events, opts).unwrap();
        assert_eq!(
            c,
            [
                ReorgClass::Random,
                ReorgClass::DoubleSpend,
                ReorgClass::DoubleSpend,
                ReorgClass::Random
            ]
        );
        let loose = ClassifyOptions {
            require_conflict: false,
            ..opts
        };
        assert_eq!(
            classify_events(&events, loose).unwrap()[3],
            ReorgClass::DoubleSpend
        );
        assert!(classify_events(
            &events,
            ClassifyOptions {
                depth_threshold: 1,
                ..opts
            }
        )
        .is_err());
    }

    #[test]
    fn grouping_examples() {
        let h = 3600;
        let four: Vec<_> = ["a", "b", "a", "b"]
            .iter()
            .enumerate()
            .map(|(i, w)| ev("BTG", i as i64 * h, 15 + i as u64, true, 1, Some(w)))
            .collect();
        let classes = vec![ReorgClass::DoubleSpend; 4];
        let eps = group_retaliation_episodes(&four, &classes, DEFAULT_WINDOW_SECS);
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].classification, EpisodeKind::Retaliation { moves: 4 });

        let eps = group_retaliation_episodes(&four[..2], &classes[..2], DEFAULT_WINDOW_SECS);
        assert_eq!(eps[0].length, 2);

        let eps = group_retaliation_episodes(&four[..1], &classes[..1], DEFAULT_WINDOW_SECS);
        assert_eq!(eps[0].classification, EpisodeKind::SingleAttack);

        // same beneficiary twice: two separate attacks
        let same = [
            ev("LCC", 0, 50, true, 1, Some("x")),
            ev("LCC", h, 60, true, 1, Some("x")),
        ];
        assert_eq!(
            group_retaliation_episodes(&same, &classes[..2], DEFAULT_WINDOW_SECS).len(),
            2
        );

        // untagged events group by time only
        let untagged = [ev("BTG", 0, 50, true, 1, None), ev("BTG", h, 60, true, 1, None)];
        let eps = group_retaliation_episodes(&untagged, &classes[..2], DEFAULT_WINDOW_SECS);
        assert_eq!(eps.len(), 1);
        assert!(!eps[0].alternation_verified);

        // outside the window
        let far = [
            ev("BTG", 0, 50, true, 1, Some("a")),
            ev("BTG", 3 * 86_400, 60, true, 1, Some("b")),
        ];
        assert_eq!(
            group_retaliation_episodes(&far, &classes[..2], DEFAULT_WINDOW_SECS).len(),
            2
        );
    }

    #[test]
    fn summary_examples() {
        let events = [
            ev("LCC", 0, 50, true, 20_000, None),
            ev("LCC", 86_400, 70, true, 30_000, None),
            ev("LCC", 100, 1, false, 0, None),
        ];
        let classes = classify_events(&events, ClassifyOptions::default()).unwrap();
        let rows = summarize(&events, &classes, DEFAULT_INCIDENT_GAP_SECS);
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].attacks, rows[0].total_usd.clone()), (2, q(50_000)));
        assert_eq!(rows[0].first_date, "1970-01-01");
        let none = summarize(&events[2..], &classes[2..], DEFAULT_INCIDENT_GAP_SECS);
        assert!(none.is_empty());
    }

    fn arb_event() -> impl Strategy<Value = ReorgEvent> {
        (
            prop::sample::select(vec!["BTG", "LCC", "EXP"]),
            0i64..2_000_000,
            1u64..120,
            any::<bool>(),
            0i64..100_000,
            prop::option::of(prop::sample::select(vec!["a", "b"])),
        )
            .prop_map(|(c, ts, d, conflict, usd, who)| {
                ev(c, ts, d, conflict, if conflict { usd } else { 0 }, who)
            })
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_double_spends(
            events in prop::collection::vec(arb_event(), 0..40), lo in 2u64..60, step in 0u64..60,
        ) {
            let a = classify_events(&events, ClassifyOptions { depth_threshold: lo, require_conflict: true }).unwrap();
            let b = classify_events(&events, ClassifyOptions { depth_threshold: lo + step, require_conflict: true }).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(!(*x == ReorgClass::Random && *y == ReorgClass::DoubleSpend));
            }
        }

        #[test]
        fn episodes_partition_double_spends(events in prop::collection::vec(arb_event(), 0..40)) {
            let classes = classify_events(&events, ClassifyOptions::default()).unwrap();
            let eps = group_retaliation_episodes(&events, &classes, DEFAULT_WINDOW_SECS);
            let grouped: usize = eps.iter().map(|e| e.length).sum();
            let ds = classes.iter().filter(|c| **c == ReorgClass::DoubleSpend).count();
            prop_assert_eq!(grouped, ds);
            for ep in &eps {
                prop_assert!(ep.events.iter().all(|e| e.depth >= DEFAULT_DEPTH_THRESHOLD && e.conflicting_spend));
            }
        }

        #[test]
        fn summary_is_order_independent(events in prop::collection::vec(arb_event(), 0..40), seed in any::<u64>()) {
            let classes = classify_events(&events, ClassifyOptions::default()).unwrap();
            let mut paired: Vec<_> = events.iter().cloned().zip(classes.iter().copied()).collect();
            // deterministic shuffle
            let n = paired.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                paired.swap(i, (s >> 33) as usize % (i + 1));
            }
            let (e2, c2): (Vec<_>, Vec<_>) = paired.into_iter().unzip();
            let a = summarize(&events, &classes, DEFAULT_INCIDENT_GAP_SECS);
            let b = summarize(&e2, &c2, DEFAULT_INCIDENT_GAP_SECS);
            let totals = |rows: &[ChainSummary]| -> BTreeMap<String, (usize, Q)> {
                let mut m: BTreeMap<String, (usize, Q)> = BTreeMap::new();
                for r in rows {
                    let entry = m.entry(r.chain.clone()).or_insert((0, Q::zero()));
                    entry.0 += r.attacks;
                    entry.1 += &r.total_usd;
                }
                m
            };
            prop_assert_eq!(totals(&a), totals(&b));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn csv_round_trip(events in prop::collection::vec(arb_event(), 0..20)) {
            let text = write_csv(&events).unwrap();
            let parsed = parse_reorg_log(text.as_bytes(), LogFormat::Csv).unwrap();
            prop_assert_eq!(&parsed, &events);
            prop_assert_eq!(write_csv(&parsed).unwrap(), text);
        }
    }
}

//! A/B experiments over conversation logs.
//!
//! Users are hashed into arms, conversations are reduced to
//! [`ConversationRecord`]s, and [`build_report`] compares the arms at each
//! minimum-POQ threshold with Welch t-tests plus Pearson correlations over
//! arm A.

pub mod stats;

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{PoqPolicy, PoqStep};
use crate::log::{group_conversations, LogRecord, Speaker};

pub use stats::{pearson_r, t_two_sided_p, welch_t_test, CorrelationResult, StatsError, WelchTest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    A,
    B,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::A => "A",
            Arm::B => "B",
        })
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid experiment config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("traffic_split must be strictly between 0 and 1, got {0}")]
    TrafficSplit(f64),
    #[error("thresholds must be sorted ascending")]
    UnsortedThresholds,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExperimentError {
    #[error("no conversation records to report on")]
    NoRecords,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub arm_a: PoqPolicy,
    pub arm_b: PoqPolicy,
    /// Fraction of users sent to arm A.
    pub traffic_split: f64,
    /// Conversations must be strictly longer than this many exchanges.
    pub min_exchanges: u32,
    pub thresholds: Vec<u32>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "poq".to_string(),
            arm_a: PoqPolicy::WYR_ONLY,
            arm_b: PoqPolicy::NONE,
            traffic_split: 0.75,
            min_exchanges: 6,
            thresholds: vec![0, 1, 2, 3],
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.traffic_split > 0.0 && self.traffic_split < 1.0) {
            return Err(ConfigError::TrafficSplit(self.traffic_split));
        }
        if self.thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(ConfigError::UnsortedThresholds);
        }
        Ok(())
    }

    pub fn policy(&self, arm: Arm) -> PoqPolicy {
        match arm {
            Arm::A => self.arm_a,
            Arm::B => self.arm_b,
        }
    }
}

/// Deterministic arm for a user: the first 53 bits of
/// `sha256(seed_le || user_id)` as a uniform draw against `traffic_split`.
pub fn assign_arm(user_id: &str, config: &ExperimentConfig) -> Arm {
    let mut hasher = Sha256::new();
    hasher.update(config.seed.to_le_bytes());
    hasher.update(user_id.as_bytes());
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    let u = (u64::from_be_bytes(word) >> 11) as f64 / (1u64 << 53) as f64;
    if u < config.traffic_split {
        Arm::A
    } else {
        Arm::B
    }
}

/// One conversation reduced to what the experiment needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationRecord {
    pub conversation_id: String,
    pub arm: Arm,
    pub exchanges: u32,
    /// Completed POQ sequences (grounded, not abandoned).
    pub poq_count: u32,
    pub rating: Option<u8>,
    pub poq_exchange_count: u32,
}

impl ConversationRecord {
    pub fn new(
        conversation_id: impl Into<String>,
        arm: Arm,
        exchanges: u32,
        poq_count: u32,
        rating: Option<u8>,
    ) -> Self {
        Self {
            conversation_id: conversation_id.into(),
            arm,
            exchanges,
            poq_count,
            rating,
            poq_exchange_count: 2 * poq_count,
        }
    }

    /// Share of the conversation's exchanges spent inside POQ sequences.
    pub fn contribution(&self) -> f64 {
        if self.exchanges == 0 {
            0.0
        } else {
            self.poq_exchange_count as f64 / self.exchanges as f64
        }
    }
}

/// Builds records from parsed logs. Conversations whose agent records
/// never carry an arm are not part of any experiment and are skipped.
pub fn records_from_logs(records: &[LogRecord]) -> Vec<ConversationRecord> {
    let mut out = Vec::new();
    for (id, turns) in group_conversations(records) {
        let mut arm = None;
        let mut exchanges = 0;
        let mut poq_count = 0;
        let mut rating = None;
        for record in turns {
            match record.speaker {
                Speaker::User => exchanges += 1,
                Speaker::Agent => {
                    let Some(ann) = record.agent_annotations() else {
                        continue;
                    };
                    arm = arm.or(ann.arm);
                    if let Some(poq) = ann.poq_sequence {
                        if poq.step == PoqStep::Ground && !poq.abandoned {
                            poq_count += 1;
                        }
                    }
                }
                Speaker::System => rating = rating.or(record.rating()),
            }
        }
        if let Some(arm) = arm {
            out.push(ConversationRecord::new(id, arm, exchanges, poq_count, rating));
        }
    }
    out
}

/// Records that enter a report row at `threshold`.
pub fn filter_records<'a>(
    records: &'a [ConversationRecord],
    config: &ExperimentConfig,
    threshold: u32,
) -> Vec<&'a ConversationRecord> {
    records
        .iter()
        .filter(|r| r.exchanges > config.min_exchanges)
        .filter(|r| r.arm == Arm::B || r.poq_count >= threshold)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub req_poq: u32,
    pub a_count: usize,
    pub b_count: usize,
    pub a_mean_rating: Option<f64>,
    pub b_mean_rating: Option<f64>,
    pub rating_p: Option<f64>,
    pub a_mean_length: Option<f64>,
    pub b_mean_length: Option<f64>,
    pub length_p: Option<f64>,
    /// Mean share of arm-A exchanges spent in POQ sequences.
    pub a_contribution: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub name: String,
    pub rows: Vec<ThresholdRow>,
    /// Arm A, rated conversations past the length filter.
    pub poq_vs_rating: Option<CorrelationResult>,
    /// Arm A, all conversations past the length filter.
    pub poq_vs_length: Option<CorrelationResult>,
}

fn mean_of(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn welch_p(a: &[f64], b: &[f64]) -> Option<f64> {
    welch_t_test(a, b).ok().map(|w| w.p)
}

pub fn build_row(records: &[ConversationRecord], config: &ExperimentConfig, threshold: u32) -> ThresholdRow {
    let kept = filter_records(records, config, threshold);
    let ratings = |arm: Arm| -> Vec<f64> { arm_filter(&kept, arm).filter_map(|r| r.rating).map(f64::from).collect() };
    let lengths = |arm: Arm| -> Vec<f64> { arm_filter(&kept, arm).map(|r| r.exchanges as f64).collect() };
    let (ra, rb) = (ratings(Arm::A), ratings(Arm::B));
    let (la, lb) = (lengths(Arm::A), lengths(Arm::B));
    let contributions: Vec<f64> = arm_filter(&kept, Arm::A).map(ConversationRecord::contribution).collect();
    ThresholdRow {
        req_poq: threshold,
        a_count: la.len(),
        b_count: lb.len(),
        a_mean_rating: mean_of(&ra),
        b_mean_rating: mean_of(&rb),
        rating_p: welch_p(&ra, &rb),
        a_mean_length: mean_of(&la),
        b_mean_length: mean_of(&lb),
        length_p: welch_p(&la, &lb),
        a_contribution: mean_of(&contributions),
    }
}

fn arm_filter<'a>(
    kept: &'a [&'a ConversationRecord],
    arm: Arm,
) -> impl Iterator<Item = &'a ConversationRecord> + 'a {
    kept.iter().copied().filter(move |r| r.arm == arm)
}

pub fn build_report(records: &[ConversationRecord], config: &ExperimentConfig) -> Result<Report, ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::NoRecords);
    }
    let rows = config
        .thresholds
        .iter()
        .map(|&t| build_row(records, config, t))
        .collect();

    let base: Vec<&ConversationRecord> = filter_records(records, config, 0)
        .into_iter()
        .filter(|r| r.arm == Arm::A)
        .collect();
    let (pq, rating): (Vec<f64>, Vec<f64>) = base
        .iter()
        .filter_map(|r| r.rating.map(|v| (r.poq_count as f64, f64::from(v))))
        .unzip();
    let (pl, length): (Vec<f64>, Vec<f64>) = base
        .iter()
        .map(|r| (r.poq_count as f64, r.exchanges as f64))
        .unzip();
    Ok(Report {
        name: config.name.clone(),
        rows,
        poq_vs_rating: pearson_r(&pq, &rating).ok(),
        poq_vs_length: pearson_r(&pl, &length).ok(),
    })
}

/// `"< .001"` below one in a thousand, otherwise three decimals without
/// the leading zero.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "< .001".to_string()
    } else {
        let s = format!("{p:.3}");
        s.strip_prefix('0').map(str::to_string).unwrap_or(s)
    }
}

fn cell(value: Option<f64>, f: impl Fn(f64) -> String) -> String {
    value.map_or_else(|| "-".to_string(), f)
}

const COLUMNS: [&str; 9] = [
    "Req.", "A convs.", "B convs.", "A rating", "B rating", "p-value", "A length", "B length",
    "p-value",
];

fn row_cells(row: &ThresholdRow) -> [String; 9] {
    let two = |v: f64| format!("{v:.2}");
    [
        row.req_poq.to_string(),
        row.a_count.to_string(),
        row.b_count.to_string(),
        cell(row.a_mean_rating, two),
        cell(row.b_mean_rating, two),
        cell(row.rating_p, format_p),
        cell(row.a_mean_length, two),
        cell(row.b_mean_length, two),
        cell(row.length_p, format_p),
    ]
}

/// Aligned text table, one line per threshold, followed by the
/// correlations.
pub fn render_table(report: &Report) -> String {
    let rows: Vec<[String; 9]> = report.rows.iter().map(row_cells).collect();
    let widths: Vec<usize> = (0..COLUMNS.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].len())
                .chain([COLUMNS[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[&str]| -> String {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        padded.join(" | ").trim_end().to_string()
    };

    let mut out = String::new();
    let _ = writeln!(out, "{}", report.name);
    let _ = writeln!(out, "{}", line(&COLUMNS));
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "{}", rule.join("-+-"));
    for r in &rows {
        let refs: Vec<&str> = r.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{}", line(&refs));
    }
    for (label, corr) in [
        ("POQ count vs rating", &report.poq_vs_rating),
        ("POQ count vs length", &report.poq_vs_length),
    ] {
        match corr {
            Some(c) => {
                let _ = writeln!(out, "{label}: r = {:.3}, p {}, n = {}", c.r, p_phrase(c.p), c.n);
            }
            None => {
                let _ = writeln!(out, "{label}: -");
            }
        }
    }
    out
}

fn p_phrase(p: f64) -> String {
    let s = format_p(p);
    if s.starts_with('<') {
        s
    } else {
        format!("= {s}")
    }
}

/// CSV with one row per threshold. Absent cells are empty; numbers are
/// written at full precision.
pub fn render_csv(report: &Report) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "req_poq",
            "a_count",
            "b_count",
            "a_mean_rating",
            "b_mean_rating",
            "rating_p",
            "a_mean_length",
            "b_mean_length",
            "length_p",
            "a_contribution",
        ])
        .expect("in-memory write");
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in &report.rows {
        writer
            .write_record([
                row.req_poq.to_string(),
                row.a_count.to_string(),
                row.b_count.to_string(),
                num(row.a_mean_rating),
                num(row.b_mean_rating),
                num(row.rating_p),
                num(row.a_mean_length),
                num(row.b_mean_length),
                num(row.length_p),
                num(row.a_contribution),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("flush to vec")).expect("csv is utf-8")
}

//! Descriptive reports over conversation logs.
//!
//! Every report reads the detections and annotations recorded at
//! conversation time; nothing here re-runs the matchers, so a report
//! describes exactly what the engine saw.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::engine::{PoqStep, RequestSource};
use crate::log::{group_conversations, LogRecord, Speaker};
use crate::user::Polarity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Hobby,
    TopicRequest(RequestSource),
    OpinionPolarityByTopic,
    IcebreakerTopics,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown report kind {0:?}; expected hobby, topic_request:explicit, topic_request:menu, opinion_polarity_by_topic or icebreaker_topics")]
pub struct UnknownKind(pub String);

impl FromStr for DistributionKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "hobby" => Self::Hobby,
            "topic_request:explicit" | "topic_request(explicit)" => {
                Self::TopicRequest(RequestSource::Explicit)
            }
            "topic_request:menu" | "topic_request(menu)" => Self::TopicRequest(RequestSource::Menu),
            "opinion_polarity_by_topic" => Self::OpinionPolarityByTopic,
            "icebreaker_topics" => Self::IcebreakerTopics,
            other => return Err(UnknownKind(other.to_string())),
        })
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hobby => "hobby",
            Self::TopicRequest(RequestSource::Explicit) => "topic_request:explicit",
            Self::TopicRequest(RequestSource::Menu) => "topic_request:menu",
            Self::OpinionPolarityByTopic => "opinion_polarity_by_topic",
            Self::IcebreakerTopics => "icebreaker_topics",
        })
    }
}

/// Half-open time window `[start, end)`; an unset bound is unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Window {
    pub start: Option<DateTime<Utc>>,
    pub end: Option<DateTime<Utc>>,
}

impl Window {
    pub const ALL: Window = Window {
        start: None,
        end: None,
    };

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start.map_or(true, |s| t >= s) && self.end.map_or(true, |e| t < e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Row {
    pub key: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionReport {
    pub kind: DistributionKind,
    /// Descending by count, then ascending by key.
    pub rows: Vec<Row>,
    pub total: u64,
    pub window: Window,
}

impl DistributionReport {
    pub fn share(&self, key: &str) -> Option<f64> {
        let row = self.rows.iter().find(|r| r.key == key)?;
        (self.total > 0).then(|| row.count as f64 / self.total as f64)
    }

    /// Number of keys whose count is strictly above `min`.
    pub fn keys_above(&self, min: u64) -> usize {
        self.rows.iter().filter(|r| r.count > min).count()
    }
}

fn sorted_rows(counts: BTreeMap<String, u64>) -> Vec<Row> {
    let mut rows: Vec<Row> = counts
        .into_iter()
        .map(|(key, count)| Row { key, count })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
    rows
}

fn polarity_label(p: Polarity) -> &'static str {
    match p {
        Polarity::Positive => "positive",
        Polarity::Negative => "negative",
    }
}

/// Counts detections of `kind` over user records inside `window`.
///
/// Opinions without a topic are not counted by
/// [`DistributionKind::OpinionPolarityByTopic`]; their keys are
/// `topic:polarity`.
pub fn compute_distribution(
    records: &[LogRecord],
    kind: DistributionKind,
    window: Window,
) -> DistributionReport {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut bump = |key: String| *counts.entry(key).or_default() += 1;
    for record in records.iter().filter(|r| window.contains(r.timestamp)) {
        let Some(det) = record.user_detections() else {
            continue;
        };
        match kind {
            DistributionKind::Hobby => det.hobbies.iter().for_each(|h| bump(h.to_string())),
            DistributionKind::TopicRequest(source) => {
                if let Some(req) = det.topic_request.filter(|r| r.source == source) {
                    bump(req.topic.to_string());
                }
            }
            DistributionKind::OpinionPolarityByTopic => {
                if let Some(op) = det.opinion {
                    if let Some(topic) = op.topic {
                        bump(format!("{topic}:{}", polarity_label(op.polarity)));
                    }
                }
            }
            DistributionKind::IcebreakerTopics => {
                if det.icebreaker.is_some() {
                    det.topics.iter().for_each(|t| bump(t.to_string()));
                }
            }
        }
    }
    let rows = sorted_rows(counts);
    DistributionReport {
        kind,
        total: rows.iter().map(|r| r.count).sum(),
        rows,
        window,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationStats {
    pub asked: u64,
    pub continued: u64,
    /// `continued / asked` to four decimals; absent when nothing was asked.
    pub rate: Option<f64>,
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

/// Share of asked opinion questions after which the next engine response
/// stayed on the question's topic.
pub fn poq_continuation_rate(records: &[LogRecord], window: Window) -> ContinuationStats {
    let (mut asked, mut continued) = (0u64, 0u64);
    for turns in group_conversations(records).values() {
        let agent: Vec<_> = turns
            .iter()
            .filter(|r| r.speaker == Speaker::Agent)
            .filter_map(|r| Some((r.timestamp, r.agent_annotations()?)))
            .collect();
        for (i, (at, ann)) in agent.iter().enumerate() {
            let Some(poq) = ann.poq_sequence.as_ref().filter(|p| p.step == PoqStep::Ask) else {
                continue;
            };
            if !window.contains(*at) {
                continue;
            }
            asked += 1;
            let next_topic = agent.get(i + 1).and_then(|(_, next)| next.topic.as_ref());
            if next_topic == Some(&poq.topic) {
                continued += 1;
            }
        }
    }
    ContinuationStats {
        asked,
        continued,
        rate: (asked > 0).then(|| round4(continued as f64 / asked as f64)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcebreakerStats {
    /// User records answering an ice-breaker.
    pub responses: u64,
    /// Of those, responses with at least one detected topic.
    pub with_topic: u64,
    /// `with_topic / responses`, 0.0 when there were no responses.
    pub rate: f64,
    /// Topic detections across all responses; one response may add
    /// several.
    pub rows: Vec<Row>,
    pub topic_total: u64,
}

pub fn icebreaker_detection_rate(records: &[LogRecord]) -> IcebreakerStats {
    let (mut responses, mut with_topic) = (0u64, 0u64);
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for det in records.iter().filter_map(LogRecord::user_detections) {
        if det.icebreaker.is_none() {
            continue;
        }
        responses += 1;
        if !det.topics.is_empty() {
            with_topic += 1;
        }
        for topic in &det.topics {
            *counts.entry(topic.to_string()).or_default() += 1;
        }
    }
    let rows = sorted_rows(counts);
    IcebreakerStats {
        responses,
        with_topic,
        rate: if responses == 0 {
            0.0
        } else {
            with_topic as f64 / responses as f64
        },
        topic_total: rows.iter().map(|r| r.count).sum(),
        rows,
    }
}

/// Aligned `key  count  share` table limited to the first `top` rows; the
/// total line always covers every row.
pub fn render_distribution(report: &DistributionReport, top: Option<usize>) -> String {
    let shown = &report.rows[..top.unwrap_or(report.rows.len()).min(report.rows.len())];
    let width = shown.iter().map(|r| r.key.len()).max().unwrap_or(0).max(3);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>8}  {:>7}", "key", "count", "share");
    for row in shown {
        let share = if report.total == 0 {
            0.0
        } else {
            row.count as f64 / report.total as f64
        };
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>6.2}%", row.key, row.count, share * 100.0);
    }
    if shown.len() < report.rows.len() {
        let _ = writeln!(out, "({} more keys not shown)", report.rows.len() - shown.len());
    }
    let _ = writeln!(out, "{:<width$}  {:>8}", "total", report.total);
    out
}

/// CSV with columns `key,count,share`; every row is written.
pub fn distribution_csv(report: &DistributionReport) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["key", "count", "share"])
        .expect("in-memory write");
    for row in &report.rows {
        let share = if report.total == 0 {
            0.0
        } else {
            row.count as f64 / report.total as f64
        };
        writer
            .write_record([row.key.clone(), row.count.to_string(), share.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("flush to vec")).expect("csv is utf-8")
}

//! Line-delimited conversation logs.
//!
//! Each conversation is a sequence of records with gapless turn indices
//! starting at 0. User records carry the engine's [`Detections`], agent
//! records its [`Annotations`], and system records out-of-band events such
//! as the final rating. Analytics and experiments read only these records.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Annotations, Detections, EngineResponse, RatingError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Agent,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub conversation_id: String,
    pub user_id: String,
    pub turn: u32,
    pub speaker: Speaker,
    pub text: String,
    #[serde(default)]
    pub annotations: serde_json::Value,
    pub timestamp: DateTime<Utc>,
}

/// Payload of a system record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemEvent {
    Rating(u8),
    Expired,
}

impl LogRecord {
    pub fn agent_annotations(&self) -> Option<Annotations> {
        match self.speaker {
            Speaker::Agent => serde_json::from_value(self.annotations.clone()).ok(),
            _ => None,
        }
    }

    pub fn user_detections(&self) -> Option<Detections> {
        match self.speaker {
            Speaker::User => serde_json::from_value(self.annotations.clone()).ok(),
            _ => None,
        }
    }

    pub fn system_event(&self) -> Option<SystemEvent> {
        match self.speaker {
            Speaker::System => serde_json::from_value(self.annotations.clone()).ok(),
            _ => None,
        }
    }

    /// The rating carried by a system record; values outside 1-5 are
    /// ignored.
    pub fn rating(&self) -> Option<u8> {
        match self.system_event()? {
            SystemEvent::Rating(r) => Some(r).filter(|r| (1..=5).contains(r)),
            SystemEvent::Expired => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Where record timestamps come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    Wall,
    /// `start` plus `step` per record; keeps simulated logs reproducible.
    Synthetic {
        start: DateTime<Utc>,
        step: Duration,
    },
}

impl Clock {
    fn at(&self, turn: u32) -> DateTime<Utc> {
        match self {
            Clock::Wall => Utc::now(),
            Clock::Synthetic { start, step } => *start + *step * turn as i32,
        }
    }
}

/// The log of one conversation, built up record by record.
#[derive(Debug, Clone)]
pub struct Transcript {
    conversation_id: String,
    user_id: String,
    clock: Clock,
    records: Vec<LogRecord>,
}

impl Transcript {
    pub fn new(conversation_id: impl Into<String>, user_id: impl Into<String>, clock: Clock) -> Self {
        Self {
            conversation_id: conversation_id.into(),
            user_id: user_id.into(),
            clock,
            records: Vec::new(),
        }
    }

    pub fn conversation_id(&self) -> &str {
        &self.conversation_id
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    fn push(&mut self, speaker: Speaker, text: &str, annotations: serde_json::Value) -> &LogRecord {
        let turn = self.records.len() as u32;
        self.records.push(LogRecord {
            conversation_id: self.conversation_id.clone(),
            user_id: self.user_id.clone(),
            turn,
            speaker,
            text: text.to_string(),
            annotations,
            timestamp: self.clock.at(turn),
        });
        self.records.last().expect("just pushed")
    }

    pub fn push_user(&mut self, text: &str, detections: &Detections) -> &LogRecord {
        let value = serde_json::to_value(detections).expect("detections serialize");
        self.push(Speaker::User, text, value)
    }

    pub fn push_agent(&mut self, response: &EngineResponse) -> &LogRecord {
        let value = serde_json::to_value(&response.annotations).expect("annotations serialize");
        self.push(Speaker::Agent, &response.text, value)
    }

    pub fn push_system(&mut self, event: &SystemEvent) -> &LogRecord {
        let value = serde_json::to_value(event).expect("event serializes");
        let text = match event {
            SystemEvent::Rating(_) => "rating",
            SystemEvent::Expired => "expired",
        };
        self.push(Speaker::System, text, value)
    }

    pub fn rating(&self) -> Option<u8> {
        self.records.iter().find_map(LogRecord::rating)
    }

    /// Appends the user's 1-5 rating, once.
    pub fn record_rating(&mut self, rating: i64) -> Result<(), RatingError> {
        if self.rating().is_some() {
            return Err(RatingError::AlreadyRated);
        }
        let value = u8::try_from(rating)
            .ok()
            .filter(|r| (1..=5).contains(r))
            .ok_or(RatingError::OutOfRange(rating))?;
        self.push_system(&SystemEvent::Rating(value));
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Writes the whole transcript to `<dir>/<conversation_id>.jsonl`,
    /// replacing any earlier copy atomically.
    pub fn write_to(&self, dir: &Path) -> io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.jsonl", sanitize(&self.conversation_id)));
        let tmp = path.with_extension("jsonl.tmp");
        fs::write(&tmp, self.to_jsonl())?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn parse_log_line(line: &str) -> Result<LogRecord, serde_json::Error> {
    serde_json::from_str(line)
}

/// Parses line-delimited records, skipping blank lines.
pub fn parse_log(text: &str, path: &Path) -> Result<Vec<LogRecord>, LogError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_log_line(line).map_err(|e| LogError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_log_file(path: &Path) -> Result<Vec<LogRecord>, LogError> {
    let text = fs::read_to_string(path).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_log(&text, path)
}

/// Reads every `*.jsonl` file in `dir`, in file-name order.
pub fn read_log_dir(dir: &Path) -> Result<Vec<LogRecord>, LogError> {
    let io_err = |source| LogError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        out.extend(read_log_file(&path)?);
    }
    Ok(out)
}

/// Groups records by conversation, each group ordered by turn.
pub fn group_conversations(records: &[LogRecord]) -> BTreeMap<&str, Vec<&LogRecord>> {
    let mut groups: BTreeMap<&str, Vec<&LogRecord>> = BTreeMap::new();
    for record in records {
        groups
            .entry(record.conversation_id.as_str())
            .or_default()
            .push(record);
    }
    for group in groups.values_mut() {
        group.sort_by_key(|r| r.turn);
    }
    groups
}

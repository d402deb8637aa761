use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    validate_bank, ContentBank, HobbyEntry, IntroScript, MarkerLexicon, Persona, PoqItem,
    TopicEntry, TopicRegistry, ValidationReport,
};

/// Required asset files, in the order they are read.
pub const ASSET_FILES: [&str; 5] = [
    "topics.json",
    "hobbies.jsonl",
    "poq.jsonl",
    "intro.json",
    "persona.json",
];

/// Optional lexicon override; the built-in lexicon is used when absent.
const MARKERS_FILE: &str = "markers.json";

/// The built-in marker lexicon.
pub const DEFAULT_MARKERS: &str = include_str!("../../assets/markers.json");

#[derive(Debug, Error)]
pub enum BankError {
    #[error("missing asset file {}", .0.display())]
    MissingAsset(PathBuf),
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("content bank is invalid ({} violation(s))", .0.violations.len())]
    Validation(ValidationReport),
}

/// A parse failure located by 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure {
    pub line: usize,
    pub message: String,
}

impl ParseFailure {
    fn from_json(err: &serde_json::Error, line_offset: usize) -> Self {
        Self {
            line: line_offset + err.line().max(1),
            message: err.to_string(),
        }
    }

    fn into_bank_error(self, file: &str) -> BankError {
        BankError::Parse {
            file: file.to_string(),
            line: self.line,
            message: self.message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsDocument {
    pub version: String,
    pub topics: Vec<TopicEntry>,
}

fn parse_document<T: DeserializeOwned>(text: &str) -> Result<T, ParseFailure> {
    serde_json::from_str(text).map_err(|e| ParseFailure::from_json(&e, 0))
}

fn parse_lines<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, ParseFailure> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| ParseFailure {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn parse_topics(text: &str) -> Result<TopicsDocument, ParseFailure> {
    parse_document(text)
}

pub fn parse_hobbies(text: &str) -> Result<Vec<HobbyEntry>, ParseFailure> {
    parse_lines(text)
}

pub fn parse_poq_bank(text: &str) -> Result<Vec<PoqItem>, ParseFailure> {
    parse_lines(text)
}

pub fn parse_intro(text: &str) -> Result<IntroScript, ParseFailure> {
    parse_document(text)
}

pub fn parse_persona(text: &str) -> Result<Persona, ParseFailure> {
    parse_document(text)
}

pub fn parse_markers(text: &str) -> Result<MarkerLexicon, ParseFailure> {
    parse_document(text)
}

/// Raw asset file contents, for building a bank without touching disk.
#[derive(Debug, Clone, Copy)]
pub struct AssetSources<'a> {
    pub topics: &'a str,
    pub hobbies: &'a str,
    pub poq: &'a str,
    pub intro: &'a str,
    pub persona: &'a str,
    pub markers: Option<&'a str>,
}

impl AssetSources<'_> {
    /// Parses every asset, then validates the assembled bank.
    pub fn build(&self) -> Result<ContentBank, BankError> {
        let topics = parse_topics(self.topics).map_err(|e| e.into_bank_error("topics.json"))?;
        let gazetteer =
            parse_hobbies(self.hobbies).map_err(|e| e.into_bank_error("hobbies.jsonl"))?;
        let poq_bank = parse_poq_bank(self.poq).map_err(|e| e.into_bank_error("poq.jsonl"))?;
        let intro_script = parse_intro(self.intro).map_err(|e| e.into_bank_error("intro.json"))?;
        let persona = parse_persona(self.persona).map_err(|e| e.into_bank_error("persona.json"))?;
        let markers = parse_markers(self.markers.unwrap_or(DEFAULT_MARKERS))
            .map_err(|e| e.into_bank_error(MARKERS_FILE))?;

        let bank = ContentBank {
            version: topics.version,
            registry: TopicRegistry {
                topics: topics.topics,
            },
            gazetteer,
            poq_bank,
            intro_script,
            persona,
            markers,
        };
        let report = validate_bank(&bank);
        if report.is_empty() {
            Ok(bank)
        } else {
            Err(BankError::Validation(report))
        }
    }
}

fn read_asset(dir: &Path, name: &str) -> Result<String, BankError> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => BankError::MissingAsset(path),
        _ => BankError::Io { path, source },
    })
}

/// Loads and validates the asset bundle in `data_dir`.
pub fn load_assets(data_dir: impl AsRef<Path>) -> Result<ContentBank, BankError> {
    let dir = data_dir.as_ref();
    let [topics, hobbies, poq, intro, persona] = ASSET_FILES.map(|name| read_asset(dir, name));
    let markers = match read_asset(dir, MARKERS_FILE) {
        Ok(text) => Some(text),
        Err(BankError::MissingAsset(_)) => None,
        Err(other) => return Err(other),
    };
    AssetSources {
        topics: &topics?,
        hobbies: &hobbies?,
        poq: &poq?,
        intro: &intro?,
        persona: &persona?,
        markers: markers.as_deref(),
    }
    .build()
}

//! Authored content: topic registry, hobby gazetteer, personal opinion
//! question bank, introduction script, persona answers and NLU marker
//! lexicons.
//!
//! A [`ContentBank`] is immutable once loaded and is shared read-only by
//! every session.

mod load;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use load::{
    load_assets, parse_hobbies, parse_intro, parse_markers, parse_persona, parse_poq_bank,
    parse_topics, AssetSources, BankError, ParseFailure, TopicsDocument, ASSET_FILES,
    DEFAULT_MARKERS,
};
pub use validate::{validate_bank, ValidationReport, Violation};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

string_id!(
    /// Stable token naming a conversation topic.
    TopicId
);
string_id!(
    /// Stable token naming a hobby in the gazetteer.
    HobbyId
);
string_id!(
    /// Unique id of a personal opinion question.
    PoqId
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicEntry {
    pub id: TopicId,
    pub display_name: String,
    pub referential_expressions: Vec<String>,
    pub has_poq: bool,
    pub menu_eligible: bool,
    /// Marks topics reconstructed to fill out the registry rather than
    /// documented ones.
    #[serde(default)]
    pub placeholder: bool,
    /// Authored on-topic prompts, delivered in order. The first one opens
    /// the topic.
    pub sub_dialogues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TopicRegistry {
    pub topics: Vec<TopicEntry>,
}

impl TopicRegistry {
    pub fn get(&self, id: &TopicId) -> Option<&TopicEntry> {
        self.topics.iter().find(|t| &t.id == id)
    }

    pub fn contains(&self, id: &TopicId) -> bool {
        self.get(id).is_some()
    }

    pub fn position(&self, id: &TopicId) -> Option<usize> {
        self.topics.iter().position(|t| &t.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &TopicId> {
        self.topics.iter().map(|t| &t.id)
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HobbyEntry {
    pub id: HobbyId,
    pub display_name: String,
    pub paraphrases: Vec<String>,
    #[serde(default)]
    pub linked_topics: Vec<TopicId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoqKind {
    /// Would-you-rather: exactly two answer options.
    Wyr,
    /// Hypothetical: open ended, optional expected answers.
    Hyp,
}

impl PoqKind {
    pub const ALL: [PoqKind; 2] = [PoqKind::Wyr, PoqKind::Hyp];

    pub fn as_str(self) -> &'static str {
        match self {
            PoqKind::Wyr => "wyr",
            PoqKind::Hyp => "hyp",
        }
    }
}

impl fmt::Display for PoqKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub choice_phrases: Vec<String>,
    pub grounding: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoqItem {
    pub id: PoqId,
    pub topic: TopicId,
    pub kind: PoqKind,
    pub question_text: String,
    #[serde(default)]
    pub expected_answers: Vec<AnswerOption>,
    pub generic_grounding: String,
    /// The agent's own answer, given after grounding the user's.
    pub opinion: String,
    pub kid_friendly: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona_note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntroStage {
    GreetName,
    RecentActivities,
    WorkSchool,
    Travel,
    FunHobbies,
    Advice,
    InviteQuestion,
    HandoffToTopics,
}

impl IntroStage {
    pub const ORDER: [IntroStage; 8] = [
        IntroStage::GreetName,
        IntroStage::RecentActivities,
        IntroStage::WorkSchool,
        IntroStage::Travel,
        IntroStage::FunHobbies,
        IntroStage::Advice,
        IntroStage::InviteQuestion,
        IntroStage::HandoffToTopics,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IntroStage::GreetName => "greet_name",
            IntroStage::RecentActivities => "recent_activities",
            IntroStage::WorkSchool => "work_school",
            IntroStage::Travel => "travel",
            IntroStage::FunHobbies => "fun_hobbies",
            IntroStage::Advice => "advice",
            IntroStage::InviteQuestion => "invite_question",
            IntroStage::HandoffToTopics => "handoff_to_topics",
        }
    }
}

/// What the engine extracts from the user's reply to an intro step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capture {
    Name,
    Hobbies,
    Occupation,
    YesNo,
    Travel,
    Free,
    Advice,
    Question,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntroStep {
    pub stage: IntroStage,
    pub capture: Capture,
    /// Prompt text; may reference `{name}`, `{hobby}` or `{travel}`. Unused
    /// for the advice step, whose prompt is the preface plus an ice-breaker.
    #[serde(default)]
    pub prompt: String,
    /// Used instead of `prompt` when a referenced placeholder is unknown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_fallback: Option<String>,
    /// Acknowledgements keyed by capture outcome; `default` is required.
    #[serde(default)]
    pub acks: BTreeMap<String, String>,
    /// Re-ask text used once when the capture fails.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reask: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Icebreaker {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntroScript {
    pub greeting_new: String,
    pub greeting_returning: String,
    pub steps: Vec<IntroStep>,
    pub advice_preface: String,
    pub icebreakers: Vec<Icebreaker>,
    pub handoff: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaqEntry {
    pub question_phrases: Vec<String>,
    pub answer_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub faq: Vec<FaqEntry>,
    pub fallback_answer: String,
    pub transitions: Vec<String>,
    pub poq_prefaces: Vec<String>,
    pub reactions: Vec<String>,
    /// `{topic}` is replaced by the topic's display name.
    pub topic_switch: String,
    /// `{options}` is replaced by the offered topics, e.g. "a, b, or c".
    pub menu_template: String,
    pub menu_default: String,
    pub topic_revisit: String,
    pub closing: String,
    pub neutral_ack: String,
}

/// Marker phrase lists driving the rule-based matchers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerLexicon {
    pub affirmative: Vec<String>,
    pub negative: Vec<String>,
    pub hedging: Vec<String>,
    pub refusal: Vec<String>,
    pub both: Vec<String>,
    pub neither: Vec<String>,
    pub positive_opinion: Vec<String>,
    pub negative_opinion: Vec<String>,
    pub discuss_commands: Vec<String>,
    /// Ordinal phrase to offer position; `-1` means the last option.
    pub ordinals: BTreeMap<String, i32>,
    pub closing: Vec<String>,
    pub name_prefixes: Vec<String>,
    pub name_stopwords: Vec<String>,
    pub student: Vec<String>,
    pub worker: Vec<String>,
    pub not_working: Vec<String>,
    pub travel_prefixes: Vec<String>,
    pub travel_suffixes: Vec<String>,
    pub travel_none: Vec<String>,
    pub child_cues: Vec<String>,
    pub substantive_min_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentBank {
    pub version: String,
    pub registry: TopicRegistry,
    pub gazetteer: Vec<HobbyEntry>,
    pub poq_bank: Vec<PoqItem>,
    pub intro_script: IntroScript,
    pub persona: Persona,
    pub markers: MarkerLexicon,
}

impl ContentBank {
    pub fn topic(&self, id: &TopicId) -> Option<&TopicEntry> {
        self.registry.get(id)
    }

    pub fn hobby(&self, id: &HobbyId) -> Option<&HobbyEntry> {
        self.gazetteer.iter().find(|h| &h.id == id)
    }

    pub fn poq(&self, id: &PoqId) -> Option<&PoqItem> {
        self.poq_bank.iter().find(|p| &p.id == id)
    }

    /// Items for a topic and kind, in bank order.
    pub fn poq_items(&self, topic: &TopicId, kind: PoqKind) -> impl Iterator<Item = &PoqItem> + '_ {
        let topic = topic.clone();
        self.poq_bank
            .iter()
            .filter(move |p| p.topic == topic && p.kind == kind)
    }

    pub fn topic_display(&self, id: &TopicId) -> String {
        self.topic(id)
            .map(|t| t.display_name.clone())
            .unwrap_or_else(|| id.to_string())
    }
}

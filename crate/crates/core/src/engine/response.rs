use serde::{Deserialize, Serialize};

use crate::content::{HobbyId, IntroStage, PoqId, PoqKind, TopicId};
use crate::experiment::Arm;
use crate::nlu::PoqAnswer;
use crate::user::{AgeSignal, Polarity, UserModelEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoqStep {
    Ask,
    Ground,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoqAnnotation {
    pub item_id: PoqId,
    pub topic: TopicId,
    pub kind: PoqKind,
    pub step: PoqStep,
    /// How the answer was read; set on the ground step only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<PoqAnswer>,
    /// True when the user left the topic instead of answering.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub abandoned: bool,
}

/// The kind of reply the engine is waiting for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedInput {
    Name,
    Hobbies,
    Occupation,
    YesNo,
    Travel,
    FreeText,
    Advice,
    Question,
    Menu,
    WyrAnswer,
    HypAnswer,
    TopicChat,
    Nothing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poq_sequence: Option<PoqAnnotation>,
    /// Topic the conversation is on after this response; unset for menus,
    /// intro steps and the closing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<TopicId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intro_stage: Option<IntroStage>,
    /// Id of the ice-breaker asked in this response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icebreaker: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub menu_offered: Vec<TopicId>,
    pub expects: ExpectedInput,
    #[serde(default)]
    pub events_emitted: Vec<UserModelEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<Arm>,
    #[serde(default)]
    pub done: bool,
}

impl Default for Annotations {
    fn default() -> Self {
        Self {
            poq_sequence: None,
            topic: None,
            intro_stage: None,
            icebreaker: None,
            menu_offered: Vec::new(),
            expects: ExpectedInput::Nothing,
            events_emitted: Vec::new(),
            arm: None,
            done: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineResponse {
    pub text: String,
    pub annotations: Annotations,
}

impl EngineResponse {
    pub fn is_ask(&self) -> bool {
        matches!(
            &self.annotations.poq_sequence,
            Some(PoqAnnotation {
                step: PoqStep::Ask,
                ..
            })
        )
    }

    pub fn is_ground(&self) -> bool {
        matches!(
            &self.annotations.poq_sequence,
            Some(PoqAnnotation {
                step: PoqStep::Ground,
                ..
            })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestSource {
    /// An unprompted discuss-topic command.
    Explicit,
    /// A pick from a menu the engine offered.
    Menu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicRequestAnnotation {
    pub topic: TopicId,
    pub source: RequestSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpinionAnnotation {
    pub topic: Option<TopicId>,
    pub polarity: Polarity,
}

/// What the engine understood from one user turn; logged with the turn.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detections {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hobbies: Vec<HobbyId>,
    /// Topics mentioned directly or linked from a mentioned hobby.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub topics: Vec<TopicId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic_request: Option<TopicRequestAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opinion: Option<OpinionAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<AgeSignal>,
    /// Intro stage this turn answered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intro_stage: Option<IntroStage>,
    /// Ice-breaker this turn answered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icebreaker: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poq_answer: Option<PoqAnswer>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub closing: bool,
}

/// Result of processing one user turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnOutcome {
    pub detections: Detections,
    pub response: EngineResponse,
}

//! The conversation state machine.
//!
//! A conversation opens with the scripted introduction, hands off to a
//! topic menu ordered by the user model, and then walks topics one
//! sub-dialogue at a time, interleaving personal opinion questions. The
//! engine itself is stateless: all per-conversation state lives in
//! [`ConversationState`] and the caller's [`UserModel`].

mod response;
mod session;
mod state;
mod turn;

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{Capture, ContentBank, PoqItem, PoqKind, TopicId};
use crate::nlu::{Nlu, PoqAnswer};
use crate::user::{AgeGroup, StoreError, UserModel};

pub use response::{
    Annotations, Detections, EngineResponse, ExpectedInput, OpinionAnnotation, PoqAnnotation,
    PoqStep, RequestSource, TopicRequestAnnotation, TurnOutcome,
};
pub use session::{Conversation, ConversationSpec, RatingError};
pub use state::{mix, ConversationState, ExchangeKind, LedgerEntry, Phase, PoqLedger, PoqPolicy};

use turn::Turn;

const SALT_ICEBREAKER: u64 = 0x1ce;
const SALT_SELECT: u64 = 0x5e1;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("conversation is closed")]
    InvalidState,
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Chance that an eligible on-topic exchange becomes a personal opinion
    /// question instead of the next sub-dialogue.
    pub poq_ask_rate: f64,
    /// Menus the user may refuse before the engine picks a topic itself.
    pub max_menu_rejections: u8,
    /// Topics offered per menu.
    pub menu_size: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            poq_ask_rate: 0.25,
            max_menu_rejections: 2,
            menu_size: 3,
        }
    }
}

pub struct Engine {
    nlu: Nlu,
    config: EngineConfig,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("bank_version", &self.bank().version)
            .field("config", &self.config)
            .finish()
    }
}

impl Engine {
    pub fn new(bank: Arc<ContentBank>, config: EngineConfig) -> Self {
        Self {
            nlu: Nlu::new(bank),
            config,
        }
    }

    pub fn bank(&self) -> &ContentBank {
        self.nlu.bank()
    }

    pub fn nlu(&self) -> &Nlu {
        &self.nlu
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Opens a conversation: counts it in the user model and greets the
    /// user, by name when the model already knows it.
    pub fn start(
        &self,
        conversation_id: impl Into<String>,
        model: &mut UserModel,
        policy: PoqPolicy,
        seed: u64,
    ) -> (ConversationState, EngineResponse) {
        model.begin_conversation();
        let mut state = ConversationState::new(conversation_id, model.user_id.clone(), policy, seed);
        let script = &self.bank().intro_script;
        state.icebreaker = state.rng(SALT_ICEBREAKER).random_range(0..script.icebreakers.len().max(1));

        let (greeting, first_step) = match &model.name {
            Some(name) => (
                script
                    .greeting_returning
                    .replace("{name}", &display_name(name)),
                self.next_step(0, model),
            ),
            None => (script.greeting_new.clone(), Some(0)),
        };
        let mut turn = Turn::new(self, &mut state, model, "");
        turn.say(greeting);
        match first_step {
            Some(step) => turn.prompt_step(step),
            None => turn.handoff(),
        }
        let outcome = turn.finish();
        (state, outcome.response)
    }

    /// Processes one user turn.
    pub fn advance(
        &self,
        state: &mut ConversationState,
        model: &mut UserModel,
        utterance: &str,
    ) -> Result<TurnOutcome, EngineError> {
        if state.is_closed() {
            return Err(EngineError::InvalidState);
        }
        state.exchange_count += 1;
        let mut turn = Turn::new(self, state, model, utterance);
        turn.run();
        Ok(turn.finish())
    }

    /// First intro step at or after `from` that still applies to the user.
    fn next_step(&self, from: usize, model: &UserModel) -> Option<usize> {
        let steps = &self.bank().intro_script.steps;
        (from..steps.len()).find(|&i| !(steps[i].capture == Capture::Name && model.name.is_some()))
    }

    /// Seeded uniform choice among the items still askable for this topic
    /// and kind; children only get kid-friendly items.
    pub fn select_poq(
        &self,
        state: &ConversationState,
        topic: &TopicId,
        kind: PoqKind,
        age_group: AgeGroup,
    ) -> Option<&PoqItem> {
        if !state.poq_ledger.is_unused(topic, kind) {
            return None;
        }
        let eligible: Vec<&PoqItem> = self
            .bank()
            .poq_items(topic, kind)
            .filter(|item| !age_group.is_child() || item.kid_friendly)
            .collect();
        eligible.choose(&mut state.rng(SALT_SELECT)).copied()
    }
}

/// Grounding for the answer, then the engine's own opinion, then the
/// transitional phrase.
pub fn assemble_poq_exchange(item: &PoqItem, answer: &PoqAnswer, transition: &str) -> String {
    let grounding = answer
        .matched_option()
        .and_then(|i| item.expected_answers.get(i))
        .map_or(item.generic_grounding.as_str(), |o| o.grounding.as_str());
    join_text([grounding, item.opinion.as_str(), transition])
}

fn join_text<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    parts
        .into_iter()
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// A stored lowercase name as it should appear in text.
pub fn display_name(name: &str) -> String {
    let mut chars = name.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

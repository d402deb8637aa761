use std::sync::Arc;

use thiserror::Error;

use super::{ConversationState, Engine, EngineError, EngineResponse, Phase, PoqPolicy, TurnOutcome};
use crate::experiment::Arm;
use crate::log::{Clock, SystemEvent, Transcript};
use crate::user::{UserLease, UserModel, UserStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RatingError {
    #[error("rating must be between 1 and 5, got {0}")]
    OutOfRange(i64),
    #[error("conversation already rated")]
    AlreadyRated,
}

/// A live conversation bound to a user store.
///
/// Holding a `Conversation` holds the user's lease, so a second
/// conversation for the same user cannot start until this one is dropped.
/// The model is saved after every turn.
pub struct Conversation {
    engine: Arc<Engine>,
    store: Arc<dyn UserStore>,
    _lease: UserLease,
    state: ConversationState,
    model: UserModel,
    transcript: Transcript,
}

/// Parameters for opening a [`Conversation`].
#[derive(Debug, Clone)]
pub struct ConversationSpec {
    pub conversation_id: String,
    pub user_id: String,
    pub policy: PoqPolicy,
    pub arm: Option<Arm>,
    pub seed: u64,
    pub clock: Clock,
}

impl Conversation {
    pub fn start(
        engine: Arc<Engine>,
        store: Arc<dyn UserStore>,
        spec: ConversationSpec,
    ) -> Result<(Self, EngineResponse), EngineError> {
        let lease = store.acquire(&spec.user_id)?;
        let mut model = store.load(&spec.user_id)?;
        let (state, mut response) =
            engine.start(spec.conversation_id.clone(), &mut model, spec.policy, spec.seed);
        response.annotations.arm = spec.arm;
        store.save(&model)?;
        let mut transcript = Transcript::new(spec.conversation_id, spec.user_id, spec.clock);
        transcript.push_agent(&response);
        Ok((
            Self {
                engine,
                store,
                _lease: lease,
                state,
                model,
                transcript,
            },
            response,
        ))
    }

    pub fn advance(&mut self, utterance: &str) -> Result<TurnOutcome, EngineError> {
        let outcome = self
            .engine
            .advance(&mut self.state, &mut self.model, utterance)?;
        self.transcript.push_user(utterance, &outcome.detections);
        self.transcript.push_agent(&outcome.response);
        self.store.save(&self.model)?;
        Ok(outcome)
    }

    /// Records the user's 1-5 rating, once.
    pub fn rate(&mut self, rating: i64) -> Result<(), RatingError> {
        self.transcript.record_rating(rating)
    }

    /// Closes the conversation without a closing exchange.
    pub fn expire(&mut self) {
        if !self.state.is_closed() {
            self.state.phase = Phase::Closing;
            self.transcript.push_system(&SystemEvent::Expired);
        }
    }

    pub fn is_closed(&self) -> bool {
        self.state.is_closed()
    }

    pub fn is_rated(&self) -> bool {
        self.transcript.rating().is_some()
    }

    pub fn state(&self) -> &ConversationState {
        &self.state
    }

    pub fn model(&self) -> &UserModel {
        &self.model
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Ends the conversation's hold on the user, keeping only its log.
    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}

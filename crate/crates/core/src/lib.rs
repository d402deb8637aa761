//! Rule-based, personalization-driven open-domain dialogue engine.
//!
//! The crate is organised bottom-up:
//!
//! * [`text`]: utterance normalization and phrase tries.
//! * [`content`]: the authored content bank and its validation.
//! * [`user`]: the per-user model and its persistent store.
//! * [`nlu`]: rule-based matchers over the content bank.
//! * [`engine`]: the conversation state machine and live sessions.
//! * [`log`]: line-delimited conversation logs.
//! * [`analytics`]: descriptive reports over logs.
//! * [`experiment`]: A/B assignment, filtering and significance tests.
//! * [`sim`]: simulated users for desk-scale experiments.

pub mod analytics;
pub mod content;
pub mod engine;
pub mod experiment;
pub mod log;
pub mod nlu;
pub mod sim;
pub mod text;
pub mod user;

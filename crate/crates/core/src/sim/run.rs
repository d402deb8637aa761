use std::io;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Duration};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::behavior::{rate, respond, ConversationProgress};
use super::{sample_profile, SimConfig, SimError, SimProfile};
use crate::content::ContentBank;
use crate::engine::{mix, Engine, PoqStep};
use crate::experiment::{assign_arm, Arm};
use crate::log::{Clock, LogRecord, SystemEvent, Transcript};
use crate::user::UserModel;

const SALT_RATING: u64 = 0x7a7e;
/// 2020-01-01T00:00:00Z; simulated logs start here.
const EPOCH: i64 = 1_577_836_800;

/// One finished simulated conversation.
#[derive(Debug, Clone)]
pub struct SimConversation {
    pub profile: SimProfile,
    pub arm: Arm,
    pub transcript: Transcript,
    pub exchanges: u32,
    pub completed_poq: u32,
    pub rating: Option<u8>,
}

/// Runs simulated users against the engine.
#[derive(Debug)]
pub struct Simulation {
    engine: Engine,
    config: SimConfig,
}

impl Simulation {
    pub fn new(bank: Arc<ContentBank>, config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        config.check_against(&bank)?;
        Ok(Self {
            engine: Engine::new(bank, config.engine),
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    /// Simulates `n` users, one conversation each. The result depends only
    /// on the bank and config, not on thread scheduling.
    pub fn run(&self, n: usize) -> Vec<SimConversation> {
        (0..n).into_par_iter().map(|i| self.run_one(i)).collect()
    }

    pub fn run_one(&self, index: usize) -> SimConversation {
        let cfg = &self.config;
        let behavior = &cfg.behavior;
        let profile = sample_profile(cfg, cfg.population.seed, index);
        let arm = assign_arm(&profile.user_id, &cfg.experiment);
        let seed = mix(behavior.seed, index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conversation_id = format!("{}-c0", profile.user_id);
        let clock = Clock::Synthetic {
            start: DateTime::from_timestamp(EPOCH + index as i64 * 3600, 0).expect("valid epoch"),
            step: Duration::seconds(7),
        };

        let mut model = UserModel::new(profile.user_id.clone());
        let (mut state, mut response) =
            self.engine
                .start(conversation_id.clone(), &mut model, cfg.experiment.policy(arm), seed);
        response.annotations.arm = Some(arm);
        let mut transcript = Transcript::new(conversation_id, profile.user_id.clone(), clock);
        transcript.push_agent(&response);

        let mut progress = ConversationProgress::default();
        let limit = behavior.max_exchanges + 1;
        while !response.annotations.done && progress.exchanges < limit {
            let utterance = respond(
                &profile,
                &response.annotations,
                progress,
                self.engine.bank(),
                behavior,
                &mut rng,
            );
            let Ok(outcome) = self.engine.advance(&mut state, &mut model, &utterance) else {
                break;
            };
            transcript.push_user(&utterance, &outcome.detections);
            transcript.push_agent(&outcome.response);
            progress.exchanges += 1;
            if let Some(poq) = &outcome.response.annotations.poq_sequence {
                if poq.step == PoqStep::Ground && !poq.abandoned {
                    progress.completed_poq += 1;
                }
            }
            response = outcome.response;
        }

        let mut rating_rng = ChaCha8Rng::seed_from_u64(mix(seed, SALT_RATING));
        let rating = (rating_rng.random::<f64>() < behavior.rating_rate)
            .then(|| rate(&profile, progress.completed_poq, behavior, &mut rating_rng));
        if let Some(r) = rating {
            transcript.push_system(&SystemEvent::Rating(r));
        }
        SimConversation {
            profile,
            arm,
            transcript,
            exchanges: progress.exchanges,
            completed_poq: progress.completed_poq,
            rating,
        }
    }
}

/// All records of the given conversations, in order.
pub fn collect_records(conversations: &[SimConversation]) -> Vec<LogRecord> {
    conversations
        .iter()
        .flat_map(|c| c.transcript.records().iter().cloned())
        .collect()
}

/// Writes one log file per conversation into `dir`.
pub fn write_logs(conversations: &[SimConversation], dir: &Path) -> io::Result<usize> {
    conversations
        .par_iter()
        .map(|c| c.transcript.write_to(dir).map(|_| ()))
        .collect::<io::Result<Vec<()>>>()?;
    Ok(conversations.len())
}

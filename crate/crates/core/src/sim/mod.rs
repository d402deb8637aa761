//! Simulated users.
//!
//! A [`SimProfile`] is a synthetic user: an age group, a few hobbies, a
//! patience budget and a rating propensity. [`respond`] answers whatever the
//! engine's last response expects, and [`Simulation`] drives whole
//! conversations in parallel, producing ordinary conversation logs.
//!
//! Effect sizes here are configuration inputs. They are tuned so the
//! experiment pipeline shows its qualitative pattern at desk scale and say
//! nothing about real users.

mod behavior;
mod run;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{ContentBank, HobbyId};
use crate::engine::{mix, EngineConfig};
use crate::experiment::ExperimentConfig;
use crate::user::AgeGroup;

pub use behavior::{rate, respond, ConversationProgress, HANG_UP};
pub use run::{collect_records, write_logs, SimConversation, Simulation};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid simulation config: {0}")]
    Invalid(String),
    #[error("hobby {0} is not in the gazetteer")]
    UnknownHobby(HobbyId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    pub seed: u64,
    pub child_rate: f64,
    /// Relative weights over gazetteer ids; normalized on use.
    pub hobby_weights: Vec<(HobbyId, f64)>,
    /// Probability of a user having 1, 2, 3, ... hobbies.
    pub hobby_count_weights: Vec<f64>,
    /// Median of the log-normal exchange budget.
    pub patience_median: f64,
    pub patience_sigma: f64,
    pub rating_mean: f64,
    pub rating_sd: f64,
    /// Share of volunteered opinions that are positive.
    pub positive_opinion_ratio: f64,
}

fn default_hobby_weights() -> Vec<(HobbyId, f64)> {
    // The first five carry 48% of the mass, gaming alone 22%.
    let head = [
        ("gaming", 0.22),
        ("reading", 0.08),
        ("television", 0.07),
        ("drawing", 0.06),
        ("biking", 0.05),
    ];
    let tail = [
        ("swimming", 6.0),
        ("basketball", 5.0),
        ("soccer", 5.0),
        ("cooking", 5.0),
        ("painting", 4.0),
        ("dancing", 4.0),
        ("singing", 4.0),
        ("watching_movies", 4.0),
        ("listening_to_music", 4.0),
        ("football", 3.0),
        ("hiking", 3.0),
        ("running", 3.0),
        ("writing", 3.0),
        ("baking", 3.0),
        ("chess", 2.5),
        ("fishing", 2.5),
        ("skateboarding", 2.5),
        ("legos", 2.5),
        ("anime", 2.5),
        ("working_out", 2.5),
        ("board_games", 2.0),
        ("camping", 2.0),
        ("guitar", 2.0),
        ("piano", 2.0),
        ("puzzles", 2.0),
        ("coding", 2.0),
        ("photography", 1.5),
        ("crafts", 1.5),
        ("gardening", 1.5),
        ("comics", 1.5),
        ("pets", 1.5),
        ("youtube", 1.5),
        ("walking", 1.0),
        ("stargazing", 1.0),
        ("horseback_riding", 1.0),
        ("martial_arts", 1.0),
        ("tennis", 1.0),
        ("baseball", 1.0),
        ("knitting", 0.5),
        ("collecting", 0.5),
    ];
    let tail_total: f64 = tail.iter().map(|(_, w)| w).sum();
    head.iter()
        .map(|&(id, w)| (HobbyId::new(id), w))
        .chain(tail.iter().map(|&(id, w)| (HobbyId::new(id), 0.52 * w / tail_total)))
        .collect()
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            child_rate: 0.1144,
            hobby_weights: default_hobby_weights(),
            hobby_count_weights: vec![0.5, 0.35, 0.15],
            patience_median: 19.5,
            patience_sigma: 0.35,
            rating_mean: 3.75,
            rating_sd: 0.55,
            positive_opinion_ratio: 9755.0 / (9755.0 + 1866.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorConfig {
    pub seed: u64,
    /// Chance a would-you-rather answer names one of the options.
    pub poq_answer_match_rate: f64,
    /// Rating points added per completed opinion question.
    pub poq_rating_effect: f64,
    /// Extra exchanges of patience per completed opinion question.
    pub poq_length_effect: f64,
    /// Mix of hypothetical answers: naming an expected answer, a long
    /// answer, struggling, refusing. Normalized on use.
    pub hyp_mix: [f64; 4],
    pub rating_noise_sd: f64,
    /// Chance the user rates the conversation at all.
    pub rating_rate: f64,
    /// Per topic-chat turn: volunteer an opinion.
    pub opinion_rate: f64,
    /// Per topic-chat turn: ask for a different topic.
    pub topic_request_rate: f64,
    /// Chance an ice-breaker answer names something to talk about.
    pub icebreaker_topic_rate: f64,
    /// Per menu: turn all options down.
    pub menu_reject_rate: f64,
    /// Hard cap on exchanges per conversation.
    pub max_exchanges: u32,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        Self {
            seed: 2,
            poq_answer_match_rate: 0.88,
            poq_rating_effect: 0.08,
            poq_length_effect: 6.0,
            hyp_mix: [0.3, 0.4, 0.25, 0.05],
            rating_noise_sd: 0.8,
            rating_rate: 0.85,
            opinion_rate: 0.25,
            topic_request_rate: 0.06,
            icebreaker_topic_rate: 0.35,
            menu_reject_rate: 0.1,
            max_exchanges: 300,
        }
    }
}

impl BehaviorConfig {
    /// The same behavior with opinion questions having no effect at all.
    pub fn null_effects(&self) -> Self {
        Self {
            poq_rating_effect: 0.0,
            poq_length_effect: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub population: PopulationConfig,
    pub behavior: BehaviorConfig,
    pub engine: EngineConfig,
    pub experiment: ExperimentConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            population: PopulationConfig::default(),
            behavior: BehaviorConfig::default(),
            engine: EngineConfig {
                poq_ask_rate: 0.1,
                ..EngineConfig::default()
            },
            experiment: ExperimentConfig::default(),
        }
    }
}

fn check_rate(name: &str, value: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SimError::Invalid(format!("{name} must be in [0, 1], got {value}")))
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let (p, b) = (&self.population, &self.behavior);
        check_rate("child_rate", p.child_rate)?;
        check_rate("positive_opinion_ratio", p.positive_opinion_ratio)?;
        check_rate("poq_answer_match_rate", b.poq_answer_match_rate)?;
        check_rate("rating_rate", b.rating_rate)?;
        check_rate("opinion_rate", b.opinion_rate)?;
        check_rate("topic_request_rate", b.topic_request_rate)?;
        check_rate("icebreaker_topic_rate", b.icebreaker_topic_rate)?;
        check_rate("menu_reject_rate", b.menu_reject_rate)?;
        check_rate("poq_ask_rate", self.engine.poq_ask_rate)?;
        if !(p.patience_median > 0.0 && p.patience_sigma >= 0.0) {
            return Err(SimError::Invalid("patience must be positive".into()));
        }
        if p.hobby_weights.iter().any(|(_, w)| *w < 0.0) || p.hobby_weights.iter().all(|(_, w)| *w == 0.0) {
            return Err(SimError::Invalid("hobby weights must be non-negative and not all zero".into()));
        }
        if p.hobby_count_weights.iter().any(|w| *w < 0.0) || p.hobby_count_weights.iter().all(|w| *w == 0.0) {
            return Err(SimError::Invalid("hobby_count_weights must be non-negative and not all zero".into()));
        }
        if b.hyp_mix.iter().any(|w| *w < 0.0) || b.hyp_mix.iter().all(|w| *w == 0.0) {
            return Err(SimError::Invalid("hyp_mix must be non-negative and not all zero".into()));
        }
        if b.rating_noise_sd < 0.0 || p.rating_sd < 0.0 || b.poq_length_effect < 0.0 {
            return Err(SimError::Invalid("spreads and length effect must be non-negative".into()));
        }
        self.experiment
            .validate()
            .map_err(|e| SimError::Invalid(e.to_string()))
    }

    /// Every weighted hobby must exist in `bank`.
    pub fn check_against(&self, bank: &ContentBank) -> Result<(), SimError> {
        for (id, _) in &self.population.hobby_weights {
            if bank.hobby(id).is_none() {
                return Err(SimError::UnknownHobby(id.clone()));
            }
        }
        Ok(())
    }
}

/// One synthetic user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimProfile {
    pub user_id: String,
    pub age_group: AgeGroup,
    /// Only children state an age.
    pub age: Option<u8>,
    pub name: String,
    pub hobbies: Vec<HobbyId>,
    /// Expected exchanges before hanging up.
    pub patience: f64,
    /// Extra exchanges of patience per completed opinion question.
    pub engagement_gain: f64,
    pub base_rating_propensity: f64,
    pub positive_opinion_ratio: f64,
}

const NAMES: [&str; 24] = [
    "alex", "sam", "jordan", "taylor", "casey", "riley", "morgan", "jamie", "avery", "quinn",
    "maria", "james", "olivia", "noah", "emma", "liam", "sofia", "lucas", "mia", "ethan",
    "ava", "mason", "zoe", "leo",
];

/// Index drawn proportionally to `weights`.
pub(crate) fn weighted_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

pub fn user_id(seed: u64, index: usize) -> String {
    format!("sim-{seed}-{index:06}")
}

/// Samples one profile; profile `index` depends only on `(seed, index)`.
pub fn sample_profile(config: &SimConfig, seed: u64, index: usize) -> SimProfile {
    let p = &config.population;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, index as u64));
    let child = rng.random::<f64>() < p.child_rate;
    let count = weighted_index(&p.hobby_count_weights, &mut rng) + 1;
    let weights: Vec<f64> = p.hobby_weights.iter().map(|(_, w)| *w).collect();
    let mut hobbies: Vec<HobbyId> = Vec::with_capacity(count);
    for _ in 0..count {
        let hobby = &p.hobby_weights[weighted_index(&weights, &mut rng)].0;
        if !hobbies.contains(hobby) {
            hobbies.push(hobby.clone());
        }
    }
    let patience = LogNormal::new(p.patience_median.ln(), p.patience_sigma)
        .expect("validated patience")
        .sample(&mut rng);
    let base = Normal::new(p.rating_mean, p.rating_sd)
        .expect("validated spread")
        .sample(&mut rng);
    SimProfile {
        user_id: user_id(seed, index),
        age_group: if child { AgeGroup::Child } else { AgeGroup::Adult },
        age: child.then(|| rng.random_range(7..=13)),
        name: NAMES[rng.random_range(0..NAMES.len())].to_string(),
        hobbies,
        patience,
        engagement_gain: config.behavior.poq_length_effect,
        base_rating_propensity: base,
        positive_opinion_ratio: p.positive_opinion_ratio,
    }
}

/// `n` profiles, deterministic for a fixed config and seed.
pub fn sample_population(n: usize, config: &SimConfig, seed: u64) -> Vec<SimProfile> {
    (0..n).map(|i| sample_profile(config, seed, i)).collect()
}

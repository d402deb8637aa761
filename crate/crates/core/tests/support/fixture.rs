//! Log fixtures whose ground truth is counted while the records are
//! generated.
#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rapport_core::analytics::{
    compute_distribution, icebreaker_detection_rate, poq_continuation_rate, DistributionKind,
    Window,
};
use rapport_core::content::{HobbyId, PoqId, PoqKind, TopicId};
use rapport_core::engine::{
    Annotations, Detections, EngineResponse, ExpectedInput, OpinionAnnotation, PoqAnnotation,
    PoqStep,
};
use rapport_core::log::{Clock, LogRecord, Transcript};
use rapport_core::user::Polarity;

pub fn t0() -> DateTime<Utc> {
    DateTime::from_timestamp(1_600_000_000, 0).unwrap()
}

/// Builds conversations one record at a time and keeps the expected
/// counts alongside.
#[derive(Default)]
pub struct Fixture {
    pub transcripts: Vec<Transcript>,
    pub hobbies: BTreeMap<String, u64>,
    pub asked: u64,
    pub continued: u64,
    pub icebreaker_responses: u64,
    pub icebreaker_with_topic: u64,
    pub icebreaker_topics: BTreeMap<String, u64>,
    pub polarity: BTreeMap<String, u64>,
}

impl Fixture {
    pub fn conversation(&mut self) -> &mut Transcript {
        let n = self.transcripts.len();
        let clock = Clock::Synthetic {
            start: t0() + Duration::hours(n as i64),
            step: Duration::seconds(3),
        };
        self.transcripts.push(Transcript::new(format!("c{n:05}"), format!("u{n}"), clock));
        self.transcripts.last_mut().unwrap()
    }

    pub fn user(&mut self, det: Detections) {
        for h in &det.hobbies {
            *self.hobbies.entry(h.to_string()).or_default() += 1;
        }
        if det.icebreaker.is_some() {
            self.icebreaker_responses += 1;
            if !det.topics.is_empty() {
                self.icebreaker_with_topic += 1;
            }
            for t in &det.topics {
                *self.icebreaker_topics.entry(t.to_string()).or_default() += 1;
            }
        }
        if let Some(OpinionAnnotation { topic: Some(t), polarity }) = &det.opinion {
            let label = if *polarity == Polarity::Positive { "positive" } else { "negative" };
            *self.polarity.entry(format!("{t}:{label}")).or_default() += 1;
        }
        self.transcripts.last_mut().unwrap().push_user("...", &det);
    }

    pub fn agent(&mut self, annotations: Annotations) {
        let response = EngineResponse {
            text: "...".into(),
            annotations,
        };
        self.transcripts.last_mut().unwrap().push_agent(&response);
    }

    /// An ask on `topic` followed by a response that either stays there or
    /// leaves.
    pub fn ask(&mut self, topic: &str, stays: bool) {
        self.asked += 1;
        if stays {
            self.continued += 1;
        }
        let poq = |step| PoqAnnotation {
            item_id: PoqId::new(format!("{topic}-wyr-1")),
            topic: TopicId::new(topic),
            kind: PoqKind::Wyr,
            step,
            answer: None,
            abandoned: !stays && step == PoqStep::Ground,
        };
        self.agent(Annotations {
            poq_sequence: Some(poq(PoqStep::Ask)),
            topic: Some(TopicId::new(topic)),
            expects: ExpectedInput::WyrAnswer,
            ..Annotations::default()
        });
        self.user(Detections::default());
        self.agent(Annotations {
            poq_sequence: Some(poq(PoqStep::Ground)),
            topic: stays.then(|| TopicId::new(topic)).or(Some(TopicId::new("elsewhere"))),
            expects: ExpectedInput::TopicChat,
            ..Annotations::default()
        });
    }

    pub fn records(&self) -> Vec<LogRecord> {
        self.transcripts.iter().flat_map(|t| t.records().iter().cloned()).collect()
    }
}

pub fn hobby_turn(hobbies: &[&str]) -> Detections {
    Detections {
        hobbies: hobbies.iter().map(|h| HobbyId::new(*h)).collect(),
        ..Detections::default()
    }
}

/// 100 hobby detections, 22 of them gaming.
pub fn gaming_fixture() -> Fixture {
    let mut fx = Fixture::default();
    fx.conversation();
    let others = ["reading", "drawing", "biking", "swimming", "chess", "piano"];
    for i in 0..100 {
        let hobby = if i < 22 { "gaming" } else { others[i % others.len()] };
        fx.user(hobby_turn(&[hobby]));
    }
    fx
}

/// 100 asks over 15 conversations, 88 of them continued.
pub fn continuation_fixture() -> Fixture {
    let mut fx = Fixture::default();
    let topics = ["dinosaurs", "food", "nature", "music"];
    for i in 0..100 {
        if i % 7 == 0 {
            fx.conversation();
        }
        fx.ask(topics[i % topics.len()], i % 25 >= 3);
    }
    fx
}

/// 2300 ice-breaker responses, 691 naming a topic (91 naming two), plus
/// one topical turn that is not an ice-breaker response.
pub fn icebreaker_fixture() -> Fixture {
    let mut fx = Fixture::default();
    fx.conversation();
    for i in 0..2300u64 {
        let topics: Vec<TopicId> = match i {
            _ if i < 600 => vec![TopicId::new("animals")],
            _ if i < 691 => vec![TopicId::new("music"), TopicId::new("sports")],
            _ => vec![],
        };
        fx.user(Detections {
            icebreaker: Some(format!("iceq{}", 1 + i % 3)),
            topics,
            ..Detections::default()
        });
    }
    fx.user(Detections {
        topics: vec![TopicId::new("food")],
        ..Detections::default()
    });
    fx
}

/// Random mix of hobby turns, asks, ice-breaker answers and opinions.
pub fn random_fixture(seed: u64) -> Fixture {
    let hobbies = ["gaming", "reading", "drawing", "swimming", "chess", "biking", "piano"];
    let topics = ["dinosaurs", "food", "sports", "music", "animals"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fx = Fixture::default();
    for _ in 0..rng.random_range(5..40) {
        fx.conversation();
        for _ in 0..rng.random_range(1..30) {
            match rng.random_range(0..4) {
                0 => {
                    let n = rng.random_range(0..3);
                    let picked: Vec<&str> = hobbies.choose_multiple(&mut rng, n).copied().collect();
                    fx.user(hobby_turn(&picked));
                }
                1 => {
                    let topic = *topics.choose(&mut rng).unwrap();
                    let stays = rng.random_bool(0.88);
                    fx.ask(topic, stays);
                }
                2 => {
                    let n = rng.random_range(0..3);
                    let picked = topics.choose_multiple(&mut rng, n).map(|t| TopicId::new(*t)).collect();
                    fx.user(Detections {
                        icebreaker: Some("iceq2".into()),
                        topics: picked,
                        ..Detections::default()
                    });
                }
                _ => {
                    let topic = rng.random_bool(0.8).then(|| TopicId::new(*topics.choose(&mut rng).unwrap()));
                    let polarity = if rng.random_bool(0.84) { Polarity::Positive } else { Polarity::Negative };
                    fx.user(Detections {
                        opinion: Some(OpinionAnnotation { topic, polarity }),
                        ..Detections::default()
                    });
                }
            }
        }
    }
    fx
}

/// Runs every analytics report over the fixture's records and compares
/// each with the generator's bookkeeping.
pub fn check_against_bookkeeping(fx: &Fixture) -> Result<(), String> {
    let records = fx.records();
    let counts = |kind| -> BTreeMap<String, u64> {
        compute_distribution(&records, kind, Window::ALL)
            .rows
            .into_iter()
            .map(|r| (r.key, r.count))
            .collect()
    };
    let compare = |what: &str, got: BTreeMap<String, u64>, want: &BTreeMap<String, u64>| {
        if &got == want {
            Ok(())
        } else {
            Err(format!("{what}: report {got:?}, bookkeeping {want:?}"))
        }
    };
    compare("hobby", counts(DistributionKind::Hobby), &fx.hobbies)?;
    compare("opinion polarity", counts(DistributionKind::OpinionPolarityByTopic), &fx.polarity)?;
    compare("ice-breaker topics", counts(DistributionKind::IcebreakerTopics), &fx.icebreaker_topics)?;
    let cont = poq_continuation_rate(&records, Window::ALL);
    if (cont.asked, cont.continued) != (fx.asked, fx.continued) {
        return Err(format!(
            "continuation: report {}/{}, bookkeeping {}/{}",
            cont.continued, cont.asked, fx.continued, fx.asked
        ));
    }
    let ice = icebreaker_detection_rate(&records);
    if (ice.responses, ice.with_topic) != (fx.icebreaker_responses, fx.icebreaker_with_topic) {
        return Err(format!(
            "ice-breaker: report {}/{}, bookkeeping {}/{}",
            ice.with_topic, ice.responses, fx.icebreaker_with_topic, fx.icebreaker_responses
        ));
    }
    Ok(())
}

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{weighted_index, BehaviorConfig, SimProfile};
use crate::content::{ContentBank, PoqItem, TopicId};
use crate::engine::{Annotations, ExpectedInput};

/// How far a simulated conversation has got before the next user turn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConversationProgress {
    /// User turns already taken.
    pub exchanges: u32,
    /// Opinion questions asked and grounded without being abandoned.
    pub completed_poq: u32,
}

pub const HANG_UP: &str = "stop";

const CHAT: [&str; 14] = [
    "cool",
    "yeah",
    "that's interesting",
    "i didn't know that",
    "no",
    "i think so",
    "haha",
    "really",
    "wow",
    "not really",
    "okay",
    "that's crazy",
    "i guess",
    "yes i do",
];
const FREE: [&str; 8] = [
    "i just like seeing new places",
    "the food is really good there",
    "my family went there once",
    "relaxing on the beach",
    "meeting new people",
    "it looks beautiful in pictures",
    "i'm not sure",
    "everything",
];
const PLACES: [&str; 12] = [
    "hawaii", "japan", "paris", "italy", "new york", "australia", "london", "mexico", "greece",
    "iceland", "egypt", "i don't know",
];
const YES_NO: [&str; 6] = ["yeah", "not really", "sometimes", "no", "yes", "kind of"];
const ADVICE: [&str; 8] = [
    "just be yourself",
    "tell more jokes",
    "be funnier",
    "ask more questions",
    "i don't know",
    "you're doing fine",
    "talk a little slower",
    "nothing really",
];
const QUESTIONS: [&str; 8] = [
    "how old are you",
    "what's your favorite food",
    "where do you live",
    "no",
    "not really",
    "what's your favorite color",
    "do you have friends",
    "what do you do for fun",
];
const SUBSTANTIVE: [&str; 5] = [
    "i would probably try to make friends with everyone around me first",
    "i think i would do something fun with my family because that sounds great",
    "probably something really creative that nobody has thought of before",
    "i would want to help people as much as i possibly could",
    "i'd go with whatever makes me laugh the most honestly",
];
const STRUGGLE: [&str; 4] = ["that's a hard question", "i don't know", "hmm i'm not sure", "i'd say"];
const REFUSE: [&str; 2] = ["skip", "pass"];
const WYR_MISS: [&str; 4] = ["i love both", "neither", "i don't know", "that's a tough one"];

fn pick<'a>(options: &[&'a str], rng: &mut impl Rng) -> &'a str {
    options.choose(rng).copied().unwrap_or("okay")
}

fn topic_name(bank: &ContentBank, topic: &TopicId) -> String {
    bank.topic_display(topic).to_lowercase()
}

/// Topics the profile's hobbies point at, in hobby order.
fn liked_topics(profile: &SimProfile, bank: &ContentBank) -> Vec<TopicId> {
    let mut out = Vec::new();
    for hobby in profile.hobbies.iter().filter_map(|h| bank.hobby(h)) {
        for topic in &hobby.linked_topics {
            if !out.contains(topic) {
                out.push(topic.clone());
            }
        }
    }
    out
}

fn hobby_phrase(profile: &SimProfile, bank: &ContentBank, rng: &mut impl Rng) -> Option<String> {
    let hobby = bank.hobby(profile.hobbies.choose(rng)?)?;
    // The first paraphrase is the canonical one; mix in the others now and then.
    let phrase = if rng.random::<f64>() < 0.7 {
        hobby.paraphrases.first()?
    } else {
        hobby.paraphrases.choose(rng)?
    };
    Some(phrase.clone())
}

fn answer_wyr(item: &PoqItem, behavior: &BehaviorConfig, rng: &mut impl Rng) -> String {
    if rng.random::<f64>() < behavior.poq_answer_match_rate {
        if let Some(phrase) = item
            .expected_answers
            .choose(rng)
            .and_then(|o| o.choice_phrases.first())
        {
            let template = pick(&["{}", "i'd pick {}", "i would choose {}", "definitely {}"], rng);
            return template.replace("{}", phrase);
        }
    }
    pick(&WYR_MISS, rng).to_string()
}

fn answer_hyp(item: &PoqItem, behavior: &BehaviorConfig, rng: &mut impl Rng) -> String {
    match weighted_index(&behavior.hyp_mix, rng) {
        0 => match item
            .expected_answers
            .choose(rng)
            .and_then(|o| o.choice_phrases.first())
        {
            Some(phrase) => format!("i think {phrase}"),
            None => pick(&SUBSTANTIVE, rng).to_string(),
        },
        1 => pick(&SUBSTANTIVE, rng).to_string(),
        2 => pick(&STRUGGLE, rng).to_string(),
        _ => pick(&REFUSE, rng).to_string(),
    }
}

fn answer_menu(
    profile: &SimProfile,
    offered: &[TopicId],
    bank: &ContentBank,
    behavior: &BehaviorConfig,
    rng: &mut impl Rng,
) -> String {
    if offered.is_empty() || rng.random::<f64>() < behavior.menu_reject_rate {
        return pick(&["no", "none of those", "not really", "no thanks"], rng).to_string();
    }
    let liked = liked_topics(profile, bank);
    let index = offered
        .iter()
        .position(|t| liked.contains(t))
        .filter(|_| rng.random::<f64>() < 0.7)
        .unwrap_or_else(|| rng.random_range(0..offered.len()));
    let name = topic_name(bank, &offered[index]);
    let roll = rng.random::<f64>();
    if roll < 0.6 {
        name
    } else if roll < 0.85 {
        format!("let's talk about {name}")
    } else {
        ["the first one", "the second one", "the third one"]
            .get(index)
            .map_or(name, |s| s.to_string())
    }
}

fn chat(
    profile: &SimProfile,
    current: Option<&TopicId>,
    bank: &ContentBank,
    behavior: &BehaviorConfig,
    rng: &mut impl Rng,
) -> String {
    let roll = rng.random::<f64>();
    if roll < behavior.topic_request_rate {
        let liked = liked_topics(profile, bank);
        let pool: Vec<&TopicId> = liked
            .iter()
            .chain(bank.registry.ids())
            .filter(|t| Some(*t) != current)
            .collect();
        let target = if rng.random::<f64>() < 0.5 {
            pool.first().copied()
        } else {
            pool.choose(rng).copied()
        };
        if let Some(topic) = target {
            return format!("let's talk about {}", topic_name(bank, topic));
        }
    }
    if roll < behavior.topic_request_rate + behavior.opinion_rate {
        if let Some(topic) = current {
            let name = topic_name(bank, topic);
            return if rng.random::<f64>() < profile.positive_opinion_ratio {
                format!("{} {name}", pick(&["i love", "i really like", "i'm into"], rng))
            } else {
                format!("{} {name}", pick(&["i don't like", "i'm not into"], rng))
            };
        }
    }
    pick(&CHAT, rng).to_string()
}

/// The simulated user's next utterance, given the engine's last response.
pub fn respond(
    profile: &SimProfile,
    last: &Annotations,
    progress: ConversationProgress,
    bank: &ContentBank,
    behavior: &BehaviorConfig,
    rng: &mut impl Rng,
) -> String {
    let budget = profile.patience + profile.engagement_gain * progress.completed_poq as f64;
    let turn = progress.exchanges + 1;
    if turn as f64 >= budget || turn >= behavior.max_exchanges {
        return HANG_UP.to_string();
    }
    match last.expects {
        ExpectedInput::Name => match profile.age {
            Some(age) => format!("my name is {} and i'm {age} years old", profile.name),
            None => {
                let template = pick(&["my name is {}", "{}", "i'm {}", "call me {}"], rng);
                template.replace("{}", &profile.name)
            }
        },
        ExpectedInput::Hobbies => match hobby_phrase(profile, bank, rng) {
            Some(phrase) if rng.random::<f64>() < 0.85 => {
                pick(&["{}", "i like {}", "mostly {}", "i've been {}"], rng).replace("{}", &phrase)
            }
            _ => pick(&["not much", "nothing really", "just staying home"], rng).to_string(),
        },
        ExpectedInput::Occupation => {
            let options: &[&str] = if profile.age_group.is_child() {
                &["i go to school", "i'm in school", "school"]
            } else {
                match weighted_index(&[0.25, 0.55, 0.2], rng) {
                    0 => &["i'm a student", "i go to college"],
                    1 => &["i work at an office", "i've been working from home", "i have a job at a store"],
                    _ => &["i don't work right now", "i'm retired"],
                }
            };
            pick(options, rng).to_string()
        }
        ExpectedInput::YesNo => pick(&YES_NO, rng).to_string(),
        ExpectedInput::Travel => pick(&PLACES, rng).to_string(),
        ExpectedInput::FreeText => pick(&FREE, rng).to_string(),
        ExpectedInput::Advice => {
            if rng.random::<f64>() < behavior.icebreaker_topic_rate {
                let liked = liked_topics(profile, bank);
                let topic = liked.choose(rng).or_else(|| {
                    let ids: Vec<&TopicId> = bank.registry.ids().collect();
                    ids.choose(rng).copied()
                });
                if let Some(topic) = topic {
                    let template = pick(
                        &["i like talking about {}", "maybe {}", "{} i guess", "you should learn more about {}"],
                        rng,
                    );
                    return template.replace("{}", &topic_name(bank, topic));
                }
            }
            pick(&ADVICE, rng).to_string()
        }
        ExpectedInput::Question => pick(&QUESTIONS, rng).to_string(),
        ExpectedInput::Menu => answer_menu(profile, &last.menu_offered, bank, behavior, rng),
        ExpectedInput::WyrAnswer | ExpectedInput::HypAnswer => {
            let item = last
                .poq_sequence
                .as_ref()
                .and_then(|p| bank.poq(&p.item_id));
            match (last.expects, item) {
                (ExpectedInput::WyrAnswer, Some(item)) => answer_wyr(item, behavior, rng),
                (_, Some(item)) => answer_hyp(item, behavior, rng),
                (_, None) => pick(&STRUGGLE, rng).to_string(),
            }
        }
        ExpectedInput::TopicChat => chat(profile, last.topic.as_ref(), bank, behavior, rng),
        ExpectedInput::Nothing => HANG_UP.to_string(),
    }
}

/// End-of-conversation rating:
/// `clamp(round(base + effect * completed + noise), 1, 5)`.
pub fn rate(profile: &SimProfile, completed_poq: u32, behavior: &BehaviorConfig, rng: &mut impl Rng) -> u8 {
    let noise = if behavior.rating_noise_sd > 0.0 {
        Normal::new(0.0, behavior.rating_noise_sd)
            .expect("validated spread")
            .sample(rng)
    } else {
        0.0
    };
    let raw = profile.base_rating_propensity + behavior.poq_rating_effect * completed_poq as f64 + noise;
    raw.round().clamp(1.0, 5.0) as u8
}

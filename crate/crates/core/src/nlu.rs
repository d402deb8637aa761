//! Rule-based understanding over normalized utterances.
//!
//! [`Nlu`] precompiles every phrase list of a [`ContentBank`] into token
//! tries. All matchers are pure functions of the utterance and the bank.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::content::{ContentBank, HobbyId, PoqItem, PoqKind, TopicId};
use crate::text::{contains_sequence, normalize_tokens, NormalizedUtterance, PhraseIndex};
use crate::user::{AgeSignal, Occupation, OpinionRecord, Polarity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicTrigger {
    ExplicitCommand,
    Mention,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicRequest {
    pub topic: TopicId,
    pub trigger: TopicTrigger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "index", rename_all = "snake_case")]
pub enum WyrOutcome {
    Choice(usize),
    Both,
    Neither,
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WyrMatch {
    pub outcome: WyrOutcome,
    pub matched_phrase: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", content = "index", rename_all = "snake_case")]
pub enum HypClass {
    Substantive,
    MatchedOption(usize),
    Struggle,
    Refusal,
    NoMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Affirmation {
    Yes,
    No,
    Unknown,
}

/// Outcome of matching an answer to a personal opinion question of either
/// kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoqAnswer {
    Wyr(WyrMatch),
    Hyp(HypClass),
}

impl PoqAnswer {
    /// Index of the expected answer whose grounding applies, if any.
    pub fn matched_option(&self) -> Option<usize> {
        match self {
            PoqAnswer::Wyr(WyrMatch {
                outcome: WyrOutcome::Choice(i),
                ..
            }) => Some(*i),
            PoqAnswer::Hyp(HypClass::MatchedOption(i)) => Some(*i),
            _ => None,
        }
    }
}

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty",
];

const GRADE_WORDS: [&str; 12] = [
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth",
    "tenth", "eleventh", "twelfth",
];

const ADULT_AGE: u32 = 18;
const MAX_TRAVEL_TOKENS: usize = 6;

fn phrase_index<'a, V: Clone>(
    phrases: impl IntoIterator<Item = &'a String>,
    value: V,
) -> PhraseIndex<V> {
    let mut index = PhraseIndex::new();
    for phrase in phrases {
        index.insert(phrase, value.clone());
    }
    index
}

fn token_lists(phrases: &[String]) -> Vec<Vec<String>> {
    let mut lists: Vec<Vec<String>> = phrases
        .iter()
        .map(|p| normalize_tokens(p))
        .filter(|t| !t.is_empty())
        .collect();
    lists.sort_by_key(|l| std::cmp::Reverse(l.len()));
    lists
}

fn parse_number(token: &str) -> Option<u32> {
    token
        .parse()
        .ok()
        .or_else(|| NUMBER_WORDS.iter().position(|w| *w == token).map(|n| n as u32))
}

fn parse_grade(token: &str) -> Option<u32> {
    if let Some(pos) = GRADE_WORDS.iter().position(|w| *w == token) {
        return Some(pos as u32 + 1);
    }
    let digits = token.trim_end_matches(|c: char| c.is_ascii_alphabetic());
    let suffix = &token[digits.len()..];
    if matches!(suffix, "st" | "nd" | "rd" | "th") {
        digits.parse().ok()
    } else {
        None
    }
}

/// Compiled matchers for one content bank.
#[derive(Debug, Clone)]
pub struct Nlu {
    bank: Arc<ContentBank>,
    hobbies: PhraseIndex<usize>,
    topics: PhraseIndex<usize>,
    affirmation: PhraseIndex<Affirmation>,
    hedging: PhraseIndex<()>,
    refusal: PhraseIndex<()>,
    both: PhraseIndex<()>,
    neither: PhraseIndex<()>,
    opinion: PhraseIndex<Polarity>,
    commands: PhraseIndex<()>,
    ordinals: PhraseIndex<i32>,
    closing: HashSet<Vec<String>>,
    name_prefixes: PhraseIndex<()>,
    name_stopwords: HashSet<String>,
    student: PhraseIndex<()>,
    worker: PhraseIndex<()>,
    not_working: PhraseIndex<()>,
    travel_prefixes: Vec<Vec<String>>,
    travel_suffixes: Vec<Vec<String>>,
    travel_none: HashSet<Vec<String>>,
    child_cues: PhraseIndex<()>,
    faq: PhraseIndex<usize>,
}

impl Nlu {
    pub fn new(bank: Arc<ContentBank>) -> Self {
        let markers = &bank.markers;
        let mut hobbies = PhraseIndex::new();
        for (idx, hobby) in bank.gazetteer.iter().enumerate() {
            for phrase in &hobby.paraphrases {
                hobbies.insert(phrase, idx);
            }
        }
        let mut topics = PhraseIndex::new();
        for (idx, topic) in bank.registry.topics.iter().enumerate() {
            for phrase in &topic.referential_expressions {
                topics.insert(phrase, idx);
            }
        }
        let mut affirmation = phrase_index(&markers.affirmative, Affirmation::Yes);
        for phrase in &markers.negative {
            affirmation.insert(phrase, Affirmation::No);
        }
        let mut opinion = phrase_index(&markers.positive_opinion, Polarity::Positive);
        for phrase in &markers.negative_opinion {
            opinion.insert(phrase, Polarity::Negative);
        }
        let mut ordinals = PhraseIndex::new();
        for (phrase, pos) in &markers.ordinals {
            ordinals.insert(phrase, *pos);
        }
        let mut faq = PhraseIndex::new();
        for (idx, entry) in bank.persona.faq.iter().enumerate() {
            for phrase in &entry.question_phrases {
                faq.insert(phrase, idx);
            }
        }
        Self {
            hobbies,
            topics,
            affirmation,
            hedging: phrase_index(&markers.hedging, ()),
            refusal: phrase_index(&markers.refusal, ()),
            both: phrase_index(&markers.both, ()),
            neither: phrase_index(&markers.neither, ()),
            opinion,
            commands: phrase_index(&markers.discuss_commands, ()),
            ordinals,
            closing: markers.closing.iter().map(|p| normalize_tokens(p)).collect(),
            name_prefixes: phrase_index(&markers.name_prefixes, ()),
            name_stopwords: markers.name_stopwords.iter().cloned().collect(),
            student: phrase_index(&markers.student, ()),
            worker: phrase_index(&markers.worker, ()),
            not_working: phrase_index(&markers.not_working, ()),
            travel_prefixes: token_lists(&markers.travel_prefixes),
            travel_suffixes: token_lists(&markers.travel_suffixes),
            travel_none: markers.travel_none.iter().map(|p| normalize_tokens(p)).collect(),
            child_cues: phrase_index(&markers.child_cues, ()),
            faq,
            bank,
        }
    }

    pub fn bank(&self) -> &Arc<ContentBank> {
        &self.bank
    }

    /// Hobbies mentioned in the utterance, duplicate-free, in utterance
    /// order. Overlapping paraphrases resolve to the longer one.
    pub fn match_hobbies(&self, utt: &NormalizedUtterance) -> Vec<HobbyId> {
        let mut out: Vec<HobbyId> = Vec::new();
        for m in self.hobbies.longest_matches(&utt.tokens) {
            let id = &self.bank.gazetteer[*m.value].id;
            if !out.contains(id) {
                out.push(id.clone());
            }
        }
        out
    }

    /// Topics referred to by expression, duplicate-free, in utterance order.
    pub fn mentioned_topics(&self, utt: &NormalizedUtterance) -> Vec<TopicId> {
        let mut out: Vec<TopicId> = Vec::new();
        for m in self.topics.longest_matches(&utt.tokens) {
            let id = &self.bank.registry.topics[*m.value].id;
            if !out.contains(id) {
                out.push(id.clone());
            }
        }
        out
    }

    /// Topics mentioned directly or linked from a mentioned hobby.
    pub fn detect_topics(&self, utt: &NormalizedUtterance) -> Vec<TopicId> {
        let mut out = self.mentioned_topics(utt);
        for hobby in self.match_hobbies(utt) {
            for topic in self.hobby_links(&hobby) {
                if !out.contains(topic) {
                    out.push(topic.clone());
                }
            }
        }
        out
    }

    pub fn hobby_links(&self, hobby: &HobbyId) -> &[TopicId] {
        self.bank
            .hobby(hobby)
            .map(|h| h.linked_topics.as_slice())
            .unwrap_or(&[])
    }

    /// A request to discuss a topic. An expression following a discuss
    /// command ("let's talk about X") is an explicit command; any other
    /// expression is a mention.
    pub fn resolve_topic_request(&self, utt: &NormalizedUtterance) -> Option<TopicRequest> {
        let mentions = self.topics.longest_matches(&utt.tokens);
        let first = mentions.first()?;
        let commands = self.commands.longest_matches(&utt.tokens);
        let commanded = commands.iter().find_map(|c| {
            mentions
                .iter()
                .find(|m| m.start >= c.end())
                .map(|m| *m.value)
        });
        let (idx, trigger) = match commanded {
            Some(idx) => (idx, TopicTrigger::ExplicitCommand),
            None => (*first.value, TopicTrigger::Mention),
        };
        Some(TopicRequest {
            topic: self.bank.registry.topics[idx].id.clone(),
            trigger,
        })
    }

    /// The topic picked from a menu. Offered topics win over other
    /// mentioned topics; ordinals resolve by offer position; a rejection
    /// yields `None`.
    pub fn resolve_menu_choice(
        &self,
        utt: &NormalizedUtterance,
        offered: &[TopicId],
    ) -> Option<TopicId> {
        if self.neither.contains_any(&utt.tokens) {
            return None;
        }
        let mentioned = self.mentioned_topics(utt);
        if let Some(topic) = mentioned.iter().find(|t| offered.contains(t)) {
            return Some(topic.clone());
        }
        if let Some(topic) = mentioned.into_iter().next() {
            return Some(topic);
        }
        let ordinal = self.ordinals.first_match(&utt.tokens)?;
        let pos = *ordinal.value;
        let idx = if pos < 0 {
            offered.len().checked_sub(pos.unsigned_abs() as usize)?
        } else {
            pos as usize
        };
        offered.get(idx).cloned()
    }

    /// Matches an answer to a would-you-rather question. `Choice` is only
    /// returned when exactly one option has a phrase in the utterance.
    pub fn match_wyr_answer(&self, utt: &NormalizedUtterance, item: &PoqItem) -> WyrMatch {
        let no_phrase = |outcome| WyrMatch {
            outcome,
            matched_phrase: None,
        };
        if utt.is_empty() {
            return no_phrase(WyrOutcome::NoMatch);
        }
        if self.neither.contains_any(&utt.tokens) {
            return no_phrase(WyrOutcome::Neither);
        }
        if self.both.contains_any(&utt.tokens) {
            return no_phrase(WyrOutcome::Both);
        }
        let hits: Vec<(usize, &String)> = item
            .expected_answers
            .iter()
            .enumerate()
            .filter_map(|(idx, option)| {
                option
                    .choice_phrases
                    .iter()
                    .find(|p| contains_sequence(&utt.tokens, &normalize_tokens(p)))
                    .map(|p| (idx, p))
            })
            .collect();
        match hits.as_slice() {
            [(idx, phrase)] => WyrMatch {
                outcome: WyrOutcome::Choice(*idx),
                matched_phrase: Some((*phrase).clone()),
            },
            [] => no_phrase(WyrOutcome::NoMatch),
            _ => no_phrase(WyrOutcome::Both),
        }
    }

    /// Classifies an answer to a hypothetical question.
    pub fn classify_hyp_answer(&self, utt: &NormalizedUtterance, item: &PoqItem) -> HypClass {
        if utt.is_empty() {
            return HypClass::NoMatch;
        }
        let earliest = item
            .expected_answers
            .iter()
            .enumerate()
            .filter_map(|(idx, option)| {
                option
                    .choice_phrases
                    .iter()
                    .filter_map(|p| crate::text::find_sequence(&utt.tokens, &normalize_tokens(p)))
                    .min()
                    .map(|start| (start, idx))
            })
            .min();
        if let Some((_, idx)) = earliest {
            return HypClass::MatchedOption(idx);
        }
        if self.refusal.contains_any(&utt.tokens) {
            return HypClass::Refusal;
        }
        let hedged: usize = self
            .hedging
            .longest_matches(&utt.tokens)
            .iter()
            .map(|m| m.len)
            .sum();
        if hedged == utt.len() {
            return HypClass::Struggle;
        }
        if utt.len() >= self.bank.markers.substantive_min_tokens {
            HypClass::Substantive
        } else {
            HypClass::NoMatch
        }
    }

    pub fn match_poq_answer(&self, utt: &NormalizedUtterance, item: &PoqItem) -> PoqAnswer {
        match item.kind {
            PoqKind::Wyr => PoqAnswer::Wyr(self.match_wyr_answer(utt, item)),
            PoqKind::Hyp => PoqAnswer::Hyp(self.classify_hyp_answer(utt, item)),
        }
    }

    /// Yes/no reading of the earliest affirmation marker.
    pub fn detect_affirmation(&self, utt: &NormalizedUtterance) -> Affirmation {
        self.affirmation
            .first_match(&utt.tokens)
            .map(|m| *m.value)
            .unwrap_or(Affirmation::Unknown)
    }

    /// An opinion stated in the utterance. The topic comes from a topic
    /// expression if present, else from a hobby linked to a topic.
    pub fn detect_opinion(
        &self,
        utt: &NormalizedUtterance,
        turn_index: u32,
    ) -> Option<OpinionRecord> {
        let marker = self.opinion.first_match(&utt.tokens)?;
        let topic = self.mentioned_topics(utt).into_iter().next().or_else(|| {
            self.match_hobbies(utt)
                .iter()
                .find_map(|h| self.hobby_links(h).first().cloned())
        });
        Some(OpinionRecord {
            topic,
            polarity: *marker.value,
            utterance: utt.raw.trim().to_string(),
            turn_index,
        })
    }

    /// A first name given after an introduction phrase, or a bare one- or
    /// two-word answer.
    pub fn extract_name(&self, utt: &NormalizedUtterance) -> Option<String> {
        let usable = |token: &String| {
            !self.name_stopwords.contains(token)
                && token.chars().all(char::is_alphabetic)
        };
        for prefix in self.name_prefixes.longest_matches(&utt.tokens) {
            if let Some(token) = utt.tokens.get(prefix.end()) {
                if usable(token) {
                    return Some(token.clone());
                }
            }
        }
        if utt.len() <= 2 && !self.name_prefixes.contains_any(&utt.tokens) {
            let first = utt.tokens.first()?;
            if usable(first) && self.bank.hobby(&HobbyId::from(first.as_str())).is_none() {
                return Some(first.clone());
            }
        }
        None
    }

    /// Age cues stated explicitly: "i'm 9", "12 years old", "4th grade",
    /// or a guardian phrase.
    pub fn detect_age_signal(&self, utt: &NormalizedUtterance) -> Option<AgeSignal> {
        let tokens = &utt.tokens;
        let classify = |age: u32| {
            if age < ADULT_AGE {
                AgeSignal::Child
            } else {
                AgeSignal::Adult
            }
        };
        for (i, token) in tokens.iter().enumerate() {
            let next = tokens.get(i + 1).map(String::as_str);
            if token == "grade" && i > 0 && parse_grade(&tokens[i - 1]).is_some() {
                return Some(AgeSignal::Child);
            }
            let Some(n) = parse_number(token) else {
                continue;
            };
            if !(1..=120).contains(&n) {
                continue;
            }
            let years_old = matches!(next, Some("years" | "year"))
                && tokens.get(i + 2).map(String::as_str) == Some("old");
            let after_i_am = (i >= 1 && tokens[i - 1] == "i'm")
                || (i >= 2 && tokens[i - 2] == "i" && tokens[i - 1] == "am");
            if years_old || (after_i_am && next.map_or(true, |n| n == "and" || n == "years")) {
                return Some(classify(n));
            }
        }
        if self.child_cues.contains_any(tokens) {
            return Some(AgeSignal::Child);
        }
        None
    }

    /// Work or school status; school mentions win over negated work.
    pub fn detect_occupation(&self, utt: &NormalizedUtterance) -> Option<Occupation> {
        if self.student.contains_any(&utt.tokens) {
            Some(Occupation::Student)
        } else if self.not_working.contains_any(&utt.tokens) {
            Some(Occupation::NoneStated)
        } else if self.worker.contains_any(&utt.tokens) {
            Some(Occupation::Worker)
        } else {
            None
        }
    }

    /// A travel destination with filler phrases stripped.
    pub fn extract_travel(&self, utt: &NormalizedUtterance) -> Option<String> {
        if self.travel_none.contains(&utt.tokens) {
            return None;
        }
        let mut tokens: &[String] = &utt.tokens;
        'prefix: loop {
            for prefix in &self.travel_prefixes {
                if tokens.len() > prefix.len() && tokens.starts_with(prefix) {
                    tokens = &tokens[prefix.len()..];
                    continue 'prefix;
                }
            }
            break;
        }
        'suffix: loop {
            for suffix in &self.travel_suffixes {
                if tokens.len() > suffix.len() && tokens.ends_with(suffix) {
                    tokens = &tokens[..tokens.len() - suffix.len()];
                    continue 'suffix;
                }
            }
            break;
        }
        if tokens.is_empty() || tokens.len() > MAX_TRAVEL_TOKENS || self.travel_none.contains(tokens)
        {
            return None;
        }
        Some(tokens.join(" "))
    }

    /// A refusal of what was offered: "neither", "no", "not really".
    pub fn is_rejection(&self, utt: &NormalizedUtterance) -> bool {
        self.neither.contains_any(&utt.tokens) || self.detect_affirmation(utt) == Affirmation::No
    }

    /// True when the whole utterance is a closing phrase.
    pub fn is_closing(&self, utt: &NormalizedUtterance) -> bool {
        self.closing.contains(&utt.tokens)
    }

    /// The persona answer for a question about the agent, if one matches.
    pub fn faq_answer(&self, utt: &NormalizedUtterance) -> Option<&str> {
        self.faq
            .first_match(&utt.tokens)
            .map(|m| self.bank.persona.faq[*m.value].answer_text.as_str())
    }
}

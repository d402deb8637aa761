use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Capture, ContentBank, IntroStage, PoqKind};
use crate::text::normalize_phrase;

/// One broken invariant, located by asset and record id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub asset: String,
    pub id: String,
    pub rule: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {} ({}): {}", self.asset, self.id, self.rule, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    /// Violations of a single rule.
    pub fn by_rule<'a>(&'a self, rule: &'a str) -> impl Iterator<Item = &'a Violation> + 'a {
        self.violations.iter().filter(move |v| v.rule == rule)
    }

    fn push(&mut self, asset: &str, id: impl Into<String>, rule: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            asset: asset.to_string(),
            id: id.into(),
            rule: rule.to_string(),
            message: message.into(),
        });
    }

    fn check_phrase(&mut self, asset: &str, id: &str, phrase: &str) {
        if phrase.chars().any(char::is_uppercase) {
            self.push(asset, id, "phrase_lowercase", format!("phrase {phrase:?} contains uppercase characters"));
        } else if normalize_phrase(phrase) != phrase || phrase.is_empty() {
            self.push(asset, id, "phrase_normalized", format!("phrase {phrase:?} is not in normalized token form"));
        }
    }

    fn check_text(&mut self, asset: &str, id: &str, field: &str, text: &str) {
        if text.trim().is_empty() {
            self.push(asset, id, "text_nonempty", format!("{field} is empty"));
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every bank invariant and reports all violations at once.
pub fn validate_bank(bank: &ContentBank) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_registry(bank, &mut report);
    check_gazetteer(bank, &mut report);
    check_poq_bank(bank, &mut report);
    check_intro(bank, &mut report);
    check_persona(bank, &mut report);
    check_markers(bank, &mut report);
    report
}

fn check_registry(bank: &ContentBank, report: &mut ValidationReport) {
    const ASSET: &str = "topics";
    let mut seen_ids = HashSet::new();
    let mut owners: HashMap<&str, &str> = HashMap::new();
    for topic in &bank.registry.topics {
        let id = topic.id.as_str();
        if !seen_ids.insert(id) {
            report.push(ASSET, id, "topic_id_unique", "duplicate topic id");
        }
        report.check_text(ASSET, id, "display_name", &topic.display_name);
        if topic.referential_expressions.is_empty() {
            report.push(ASSET, id, "topic_expressions_nonempty", "topic has no referential expressions");
        }
        for expr in &topic.referential_expressions {
            report.check_phrase(ASSET, id, expr);
            match owners.get(expr.as_str()) {
                Some(owner) if *owner != id => report.push(
                    ASSET,
                    id,
                    "topic_expression_unique",
                    format!("expression {expr:?} already refers to topic {owner}"),
                ),
                _ => {
                    owners.insert(expr, id);
                }
            }
        }
        let display = normalize_phrase(&topic.display_name);
        if !topic.referential_expressions.contains(&display) {
            report.push(
                ASSET,
                id,
                "topic_display_expression",
                format!("display name {display:?} must also be a referential expression"),
            );
        }
        if topic.sub_dialogues.is_empty() {
            report.push(ASSET, id, "topic_sub_dialogues_nonempty", "topic has no sub-dialogues");
        }
        for prompt in &topic.sub_dialogues {
            report.check_text(ASSET, id, "sub_dialogue", prompt);
        }
    }
}

fn check_gazetteer(bank: &ContentBank, report: &mut ValidationReport) {
    const ASSET: &str = "hobbies";
    let mut seen_ids = HashSet::new();
    let mut owners: HashMap<&str, &str> = HashMap::new();
    for hobby in &bank.gazetteer {
        let id = hobby.id.as_str();
        if !seen_ids.insert(id) {
            report.push(ASSET, id, "hobby_id_unique", "duplicate hobby id");
        }
        report.check_text(ASSET, id, "display_name", &hobby.display_name);
        if hobby.paraphrases.is_empty() {
            report.push(ASSET, id, "hobby_paraphrases_nonempty", "hobby has no paraphrases");
        }
        for phrase in &hobby.paraphrases {
            report.check_phrase(ASSET, id, phrase);
            match owners.get(phrase.as_str()) {
                Some(owner) if *owner != id => report.push(
                    ASSET,
                    id,
                    "hobby_paraphrase_unique",
                    format!("paraphrase {phrase:?} already belongs to hobby {owner}"),
                ),
                _ => {
                    owners.insert(phrase, id);
                }
            }
        }
        for topic in &hobby.linked_topics {
            if !bank.registry.contains(topic) {
                report.push(ASSET, id, "hobby_topic_exists", format!("linked topic {topic} is not registered"));
            }
        }
    }
}

fn check_poq_bank(bank: &ContentBank, report: &mut ValidationReport) {
    const ASSET: &str = "poq";
    let mut seen_ids = HashSet::new();
    for item in &bank.poq_bank {
        let id = item.id.as_str();
        if !seen_ids.insert(id) {
            report.push(ASSET, id, "poq_id_unique", "duplicate question id");
        }
        match bank.registry.get(&item.topic) {
            None => report.push(ASSET, id, "poq_topic_exists", format!("unknown topic {}", item.topic)),
            Some(topic) if !topic.has_poq => report.push(
                ASSET,
                id,
                "poq_topic_has_poq",
                format!("topic {} does not accept personal opinion questions", item.topic),
            ),
            Some(_) => {}
        }
        if item.kind == PoqKind::Wyr && item.expected_answers.len() != 2 {
            report.push(
                ASSET,
                id,
                "wyr_two_options",
                format!("wyr requires exactly 2 options, found {}", item.expected_answers.len()),
            );
        }
        report.check_text(ASSET, id, "question_text", &item.question_text);
        report.check_text(ASSET, id, "generic_grounding", &item.generic_grounding);
        report.check_text(ASSET, id, "opinion", &item.opinion);
        for option in &item.expected_answers {
            if option.choice_phrases.is_empty() {
                report.push(ASSET, id, "option_phrases_nonempty", "answer option has no choice phrases");
            }
            for phrase in &option.choice_phrases {
                report.check_phrase(ASSET, id, phrase);
            }
            report.check_text(ASSET, id, "grounding", &option.grounding);
        }
    }

    let mut kid_coverage: BTreeMap<(&str, PoqKind), usize> = BTreeMap::new();
    for item in bank.poq_bank.iter().filter(|p| p.kid_friendly) {
        *kid_coverage.entry((item.topic.as_str(), item.kind)).or_default() += 1;
    }
    for topic in bank.registry.topics.iter().filter(|t| t.has_poq) {
        for kind in PoqKind::ALL {
            if !kid_coverage.contains_key(&(topic.id.as_str(), kind)) {
                report.push(
                    ASSET,
                    topic.id.as_str(),
                    "kid_friendly_coverage",
                    format!("no kid-friendly {kind} item for topic {}", topic.id),
                );
            }
        }
    }
}

fn check_intro(bank: &ContentBank, report: &mut ValidationReport) {
    const ASSET: &str = "intro";
    let script = &bank.intro_script;
    report.check_text(ASSET, "greeting_new", "greeting_new", &script.greeting_new);
    report.check_text(ASSET, "greeting_returning", "greeting_returning", &script.greeting_returning);
    report.check_text(ASSET, "advice_preface", "advice_preface", &script.advice_preface);
    report.check_text(ASSET, "handoff", "handoff", &script.handoff);
    if script.icebreakers.len() != 3 {
        report.push(
            ASSET,
            "icebreakers",
            "intro_icebreakers",
            format!("expected exactly 3 ice-breaker questions, found {}", script.icebreakers.len()),
        );
    }
    for ice in &script.icebreakers {
        report.check_text(ASSET, &ice.id, "icebreaker", &ice.text);
    }

    let mut last_rank = 0;
    for (idx, step) in script.steps.iter().enumerate() {
        let id = format!("step {idx} ({})", step.stage.as_str());
        let rank = IntroStage::ORDER.iter().position(|s| *s == step.stage).unwrap_or(0);
        if rank < last_rank {
            report.push(ASSET, &id, "intro_stage_order", "steps must follow the stage order");
        }
        last_rank = rank;
        if step.stage == IntroStage::HandoffToTopics {
            report.push(ASSET, &id, "intro_stage_order", "handoff is implicit and takes no step");
        }
        if step.capture != Capture::Advice {
            report.check_text(ASSET, &id, "prompt", &step.prompt);
        }
        if !step.acks.contains_key("default") {
            report.push(ASSET, &id, "intro_default_ack", "every step needs a default acknowledgement");
        }
    }
    for (stage, capture) in [
        (IntroStage::GreetName, Capture::Name),
        (IntroStage::Advice, Capture::Advice),
        (IntroStage::InviteQuestion, Capture::Question),
    ] {
        let count = script
            .steps
            .iter()
            .filter(|s| s.stage == stage && s.capture == capture)
            .count();
        if count != 1 {
            report.push(
                ASSET,
                stage.as_str(),
                "intro_required_step",
                format!("expected exactly one {} step capturing {capture:?}, found {count}", stage.as_str()),
            );
        }
    }
}

fn check_persona(bank: &ContentBank, report: &mut ValidationReport) {
    const ASSET: &str = "persona";
    let persona = &bank.persona;
    for (idx, entry) in persona.faq.iter().enumerate() {
        let id = format!("faq {idx}");
        if entry.question_phrases.is_empty() {
            report.push(ASSET, &id, "faq_phrases_nonempty", "faq entry has no question phrases");
        }
        for phrase in &entry.question_phrases {
            report.check_phrase(ASSET, &id, phrase);
        }
        report.check_text(ASSET, &id, "answer_text", &entry.answer_text);
    }
    for (field, list) in [
        ("transitions", &persona.transitions),
        ("poq_prefaces", &persona.poq_prefaces),
        ("reactions", &persona.reactions),
    ] {
        if list.iter().all(|s| s.trim().is_empty()) {
            report.push(ASSET, field, "persona_list_nonempty", format!("{field} needs at least one entry"));
        }
    }
    for (field, text) in [
        ("fallback_answer", &persona.fallback_answer),
        ("topic_switch", &persona.topic_switch),
        ("menu_template", &persona.menu_template),
        ("menu_default", &persona.menu_default),
        ("topic_revisit", &persona.topic_revisit),
        ("closing", &persona.closing),
        ("neutral_ack", &persona.neutral_ack),
    ] {
        report.check_text(ASSET, field, field, text);
    }
}

fn check_markers(bank: &ContentBank, report: &mut ValidationReport) {
    const ASSET: &str = "markers";
    let m = &bank.markers;
    let lists: [(&str, &Vec<String>); 19] = [
        ("affirmative", &m.affirmative),
        ("negative", &m.negative),
        ("hedging", &m.hedging),
        ("refusal", &m.refusal),
        ("both", &m.both),
        ("neither", &m.neither),
        ("positive_opinion", &m.positive_opinion),
        ("negative_opinion", &m.negative_opinion),
        ("discuss_commands", &m.discuss_commands),
        ("closing", &m.closing),
        ("name_prefixes", &m.name_prefixes),
        ("name_stopwords", &m.name_stopwords),
        ("student", &m.student),
        ("worker", &m.worker),
        ("not_working", &m.not_working),
        ("travel_prefixes", &m.travel_prefixes),
        ("travel_suffixes", &m.travel_suffixes),
        ("travel_none", &m.travel_none),
        ("child_cues", &m.child_cues),
    ];
    for (name, list) in lists {
        for phrase in list {
            report.check_phrase(ASSET, name, phrase);
        }
    }
    for phrase in m.ordinals.keys() {
        report.check_phrase(ASSET, "ordinals", phrase);
    }
    if m.substantive_min_tokens == 0 {
        report.push(ASSET, "substantive_min_tokens", "substantive_threshold", "threshold must be at least 1");
    }
}

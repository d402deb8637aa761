use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::response::{
    Annotations, Detections, EngineResponse, ExpectedInput, OpinionAnnotation, PoqAnnotation,
    PoqStep, RequestSource, TopicRequestAnnotation, TurnOutcome,
};
use super::state::{ConversationState, ExchangeKind, Phase};
use super::{assemble_poq_exchange, display_name, join_text, Engine};
use crate::content::{Capture, ContentBank, IntroStage, PoqId, PoqKind, TopicId};
use crate::nlu::{Affirmation, Nlu, TopicTrigger};
use crate::text::NormalizedUtterance;
use crate::user::{rank_topics, Occupation, UserModel, UserModelEvent};

/// Everything touched while answering a single user turn.
pub(super) struct Turn<'a> {
    engine: &'a Engine,
    bank: &'a ContentBank,
    nlu: &'a Nlu,
    state: &'a mut ConversationState,
    model: &'a mut UserModel,
    utt: NormalizedUtterance,
    rng: ChaCha8Rng,
    detections: Detections,
    parts: Vec<String>,
    ann: Annotations,
}

fn expected_for(capture: Capture) -> ExpectedInput {
    match capture {
        Capture::Name => ExpectedInput::Name,
        Capture::Hobbies => ExpectedInput::Hobbies,
        Capture::Occupation => ExpectedInput::Occupation,
        Capture::YesNo => ExpectedInput::YesNo,
        Capture::Travel => ExpectedInput::Travel,
        Capture::Free => ExpectedInput::FreeText,
        Capture::Advice => ExpectedInput::Advice,
        Capture::Question => ExpectedInput::Question,
    }
}

fn occupation_key(occupation: Occupation) -> &'static str {
    match occupation {
        Occupation::Worker => "worker",
        Occupation::Student => "student",
        Occupation::NoneStated => "none_stated",
        Occupation::Unknown => "default",
    }
}

/// Upper-cases the first letter of each sentence; substituted names and
/// hobbies are stored lowercase.
fn capitalize_sentences(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut at_start = true;
    let mut prev_end = false;
    for c in text.chars() {
        if at_start && c.is_alphabetic() {
            out.extend(c.to_uppercase());
            at_start = false;
        } else {
            out.push(c);
            if !c.is_whitespace() {
                at_start = false;
            }
        }
        if c.is_whitespace() && prev_end {
            at_start = true;
        }
        prev_end = matches!(c, '.' | '!' | '?');
    }
    out
}

/// "a", "a or b", "a, b, or c".
fn format_options(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} or {b}"),
        [rest @ .., last] => format!("{}, or {last}", rest.join(", ")),
    }
}

impl<'a> Turn<'a> {
    pub(super) fn new(
        engine: &'a Engine,
        state: &'a mut ConversationState,
        model: &'a mut UserModel,
        utterance: &str,
    ) -> Self {
        let rng = state.rng(0);
        Self {
            engine,
            bank: engine.bank(),
            nlu: engine.nlu(),
            state,
            model,
            utt: NormalizedUtterance::new(utterance),
            rng,
            detections: Detections::default(),
            parts: Vec::new(),
            ann: Annotations::default(),
        }
    }

    pub(super) fn say(&mut self, text: impl Into<String>) {
        self.parts.push(text.into());
    }

    fn emit(&mut self, event: UserModelEvent) {
        self.model.apply_event(&event);
        self.ann.events_emitted.push(event);
    }

    fn pick<'t>(&mut self, options: &'t [String]) -> &'t str {
        options
            .choose(&mut self.rng)
            .map(String::as_str)
            .unwrap_or("")
    }

    pub(super) fn finish(mut self) -> TurnOutcome {
        let mut text = capitalize_sentences(&join_text(self.parts.iter().map(String::as_str)));
        if text.is_empty() {
            text = self.bank.persona.neutral_ack.clone();
        }
        self.ann.done = self.state.is_closed();
        TurnOutcome {
            detections: self.detections,
            response: EngineResponse {
                text,
                annotations: self.ann,
            },
        }
    }

    pub(super) fn run(&mut self) {
        if self.nlu.is_closing(&self.utt) {
            self.detections.closing = true;
            self.close();
            return;
        }
        self.detect_always();
        let request = self
            .nlu
            .resolve_topic_request(&self.utt)
            .filter(|r| r.trigger == TopicTrigger::ExplicitCommand)
            .map(|r| r.topic);
        match self.state.phase.clone() {
            Phase::Intro { step, attempts } => self.intro_turn(step, attempts, request),
            Phase::Topic { topic, awaiting } => self.topic_turn(topic, awaiting, request),
            Phase::Menu { rejections } => self.menu_turn(rejections),
            Phase::Closing => unreachable!("advance rejects closed conversations"),
        }
    }

    /// Detections that apply in every phase.
    fn detect_always(&mut self) {
        let hobbies = self.nlu.match_hobbies(&self.utt);
        if let Some(first) = hobbies.first().and_then(|h| self.bank.hobby(h)) {
            self.state.last_hobby = Some(first.display_name.clone());
        }
        for hobby in &hobbies {
            self.emit(UserModelEvent::HobbyDetected(hobby.clone()));
        }
        self.detections.hobbies = hobbies;
        self.detections.topics = self.nlu.detect_topics(&self.utt);
        if let Some(signal) = self.nlu.detect_age_signal(&self.utt) {
            self.detections.age = Some(signal);
            self.emit(UserModelEvent::AgeSignal(signal));
        }
        if let Some(opinion) = self.nlu.detect_opinion(&self.utt, self.state.exchange_count) {
            self.detections.opinion = Some(OpinionAnnotation {
                topic: opinion.topic.clone(),
                polarity: opinion.polarity,
            });
            self.emit(UserModelEvent::OpinionStated(opinion));
        }
    }

    fn close(&mut self) {
        if let Phase::Topic {
            awaiting: Some(id), ..
        } = &self.state.phase
        {
            if let Some(item) = self.bank.poq(id) {
                self.ann.poq_sequence = Some(PoqAnnotation {
                    item_id: item.id.clone(),
                    topic: item.topic.clone(),
                    kind: item.kind,
                    step: PoqStep::Ground,
                    answer: None,
                    abandoned: true,
                });
            }
        }
        self.state.phase = Phase::Closing;
        self.state.menu_offered = None;
        self.ann.topic = None;
        self.say(self.bank.persona.closing.clone());
        self.ann.expects = ExpectedInput::Nothing;
    }

    /// Fills `{name}`, `{hobby}` and `{travel}`; `None` when a referenced
    /// value is unknown.
    fn render(&self, template: &str) -> Option<String> {
        let mut out = template.to_string();
        let values = [
            ("{name}", self.model.name.as_deref().map(display_name)),
            ("{hobby}", self.state.last_hobby.clone()),
            (
                "{travel}",
                self.state
                    .travel
                    .as_deref()
                    .map(|t| t.split(' ').map(display_name).collect::<Vec<_>>().join(" ")),
            ),
        ];
        for (key, value) in values {
            if out.contains(key) {
                out = out.replace(key, &value?);
            }
        }
        Some(out)
    }

    // ---- introduction ----

    pub(super) fn prompt_step(&mut self, index: usize) {
        let script = &self.bank.intro_script;
        let step = &script.steps[index];
        if step.capture == Capture::Advice {
            let ice = &script.icebreakers[self.state.icebreaker];
            self.say(script.advice_preface.clone());
            self.say(ice.text.clone());
            self.ann.icebreaker = Some(ice.id.clone());
        } else {
            let text = self
                .render(&step.prompt)
                .or_else(|| step.prompt_fallback.as_deref().and_then(|f| self.render(f)))
                .unwrap_or_else(|| step.prompt.clone());
            self.say(text);
        }
        self.state.phase = Phase::Intro {
            step: index,
            attempts: 0,
        };
        self.ann.intro_stage = Some(step.stage);
        self.ann.expects = expected_for(step.capture);
    }

    pub(super) fn handoff(&mut self) {
        self.say(self.bank.intro_script.handoff.clone());
        self.ann.intro_stage = Some(IntroStage::HandoffToTopics);
        self.offer_menu(0, false);
    }

    fn intro_turn(&mut self, index: usize, attempts: u8, request: Option<TopicId>) {
        if let Some(topic) = request {
            self.request_topic(topic, RequestSource::Explicit);
            return;
        }
        let script = &self.bank.intro_script;
        let step = &script.steps[index];
        self.detections.intro_stage = Some(step.stage);
        let mut ack_override = None;
        let key = match step.capture {
            Capture::Name => match self.nlu.extract_name(&self.utt) {
                Some(name) => {
                    self.emit(UserModelEvent::NameStated(name));
                    "captured"
                }
                None => {
                    if let (0, Some(reask)) = (attempts, &step.reask) {
                        self.say(reask.clone());
                        self.state.phase = Phase::Intro {
                            step: index,
                            attempts: 1,
                        };
                        self.ann.intro_stage = Some(step.stage);
                        self.ann.expects = ExpectedInput::Name;
                        return;
                    }
                    "default"
                }
            },
            Capture::Hobbies if !self.detections.hobbies.is_empty() => "matched",
            Capture::Hobbies | Capture::Free => "default",
            Capture::Occupation => match self.nlu.detect_occupation(&self.utt) {
                Some(occupation) => {
                    self.emit(UserModelEvent::OccupationSignal(occupation));
                    occupation_key(occupation)
                }
                None => "default",
            },
            Capture::YesNo => match self.nlu.detect_affirmation(&self.utt) {
                Affirmation::Yes => "yes",
                Affirmation::No => "no",
                Affirmation::Unknown => "default",
            },
            Capture::Travel => match self.nlu.extract_travel(&self.utt) {
                Some(place) => {
                    self.state.travel = Some(place.clone());
                    self.emit(UserModelEvent::TravelInterest(place));
                    "captured"
                }
                None => "default",
            },
            Capture::Advice => {
                self.detections.icebreaker = script
                    .icebreakers
                    .get(self.state.icebreaker)
                    .map(|ice| ice.id.clone());
                let advice = self.utt.raw.trim();
                if !advice.is_empty() {
                    self.emit(UserModelEvent::AdviceGiven(advice.to_string()));
                }
                "default"
            }
            Capture::Question => match self.nlu.faq_answer(&self.utt) {
                Some(answer) => {
                    ack_override = Some(answer.to_string());
                    "faq"
                }
                None => "default",
            },
        };
        let ack = ack_override.or_else(|| {
            step.acks
                .get(key)
                .and_then(|a| self.render(a))
                .or_else(|| step.acks.get("default").and_then(|a| self.render(a)))
        });
        if let Some(ack) = ack {
            self.say(ack);
        }
        match self.engine.next_step(index + 1, self.model) {
            Some(next) => self.prompt_step(next),
            None => self.handoff(),
        }
    }

    // ---- menus ----

    /// Offers the best-ranked topics not yet discussed, or closes the
    /// conversation when none are left.
    fn offer_menu(&mut self, rejections: u8, continuing: bool) {
        if !continuing {
            self.state.menu_history.clear();
        }
        let options = self.menu_candidates();
        if options.is_empty() {
            self.close();
            return;
        }
        let names: Vec<String> = options.iter().map(|t| self.bank.topic_display(t)).collect();
        let text = self
            .bank
            .persona
            .menu_template
            .replace("{options}", &format_options(&names));
        self.say(text);
        self.ann.topic = None;
        self.state.menu_history.extend(options.iter().cloned());
        self.state.menu_offered = Some(options.clone());
        self.state.phase = Phase::Menu { rejections };
        self.state.last_exchange_kind = ExchangeKind::Other;
        self.ann.menu_offered = options;
        self.ann.expects = ExpectedInput::Menu;
    }

    fn menu_candidates(&self) -> Vec<TopicId> {
        let registry = &self.bank.registry;
        let linked = self.model.linked_topics(|h| self.nlu.hobby_links(h));
        let current = self.state.current_topic();
        rank_topics(self.model, registry, &linked)
            .into_iter()
            .filter(|t| {
                registry.get(t).is_some_and(|e| e.menu_eligible)
                    && !self.state.discussed.contains(t)
                    && Some(t) != current
                    && !self.state.menu_history.contains(t)
            })
            .take(self.engine.config.menu_size)
            .collect()
    }

    fn menu_turn(&mut self, rejections: u8) {
        let offered = self.state.menu_offered.clone().unwrap_or_default();
        if let Some(topic) = self.nlu.resolve_menu_choice(&self.utt, &offered) {
            let source = if offered.contains(&topic) {
                RequestSource::Menu
            } else {
                RequestSource::Explicit
            };
            self.request_topic(topic, source);
            return;
        }
        if self.nlu.is_rejection(&self.utt)
            && rejections < self.engine.config.max_menu_rejections
            && !self.menu_candidates().is_empty()
        {
            self.say(self.bank.persona.neutral_ack.clone());
            self.offer_menu(rejections + 1, true);
            return;
        }
        match offered.first() {
            Some(topic) => {
                let text = self
                    .bank
                    .persona
                    .menu_default
                    .replace("{topic}", &self.bank.topic_display(topic));
                self.say(text);
                self.enter_topic(topic.clone());
            }
            None => self.close(),
        }
    }

    // ---- topics ----

    fn request_topic(&mut self, topic: TopicId, source: RequestSource) {
        self.emit(UserModelEvent::TopicRequested(topic.clone()));
        self.detections.topic_request = Some(TopicRequestAnnotation {
            topic: topic.clone(),
            source,
        });
        let text = self
            .bank
            .persona
            .topic_switch
            .replace("{topic}", &self.bank.topic_display(&topic));
        self.say(text);
        self.enter_topic(topic);
    }

    fn enter_topic(&mut self, topic: TopicId) {
        let finished = self
            .bank
            .topic(&topic)
            .is_some_and(|e| self.state.progress(&topic) >= e.sub_dialogues.len());
        if finished {
            let text = self
                .bank
                .persona
                .topic_revisit
                .replace("{topic}", &self.bank.topic_display(&topic));
            self.say(text);
        }
        self.state.discussed.insert(topic.clone());
        self.state.menu_offered = None;
        self.state.menu_history.clear();
        self.state.phase = Phase::Topic {
            topic: topic.clone(),
            awaiting: None,
        };
        self.topic_content(topic, true);
    }

    /// The next on-topic move: a question (when allowed), else the next
    /// sub-dialogue, else a menu once the topic is used up.
    fn topic_content(&mut self, topic: TopicId, allow_ask: bool) {
        self.ann.topic = Some(topic.clone());
        if allow_ask && self.try_ask(&topic) {
            return;
        }
        let Some(entry) = self.bank.topic(&topic) else {
            self.offer_menu(0, false);
            return;
        };
        let progress = self.state.progress(&topic);
        if let Some(prompt) = entry.sub_dialogues.get(progress) {
            self.say(prompt.clone());
            self.state.topic_progress.insert(topic, progress + 1);
            self.state.last_exchange_kind = ExchangeKind::Other;
            self.ann.expects = ExpectedInput::TopicChat;
        } else {
            self.offer_menu(0, false);
        }
    }

    fn try_ask(&mut self, topic: &TopicId) -> bool {
        let engine = self.engine;
        let has_poq = self.bank.topic(topic).is_some_and(|e| e.has_poq);
        if !has_poq
            || self.state.last_exchange_kind == ExchangeKind::Poq
            || self.state.progress(topic) == 0
        {
            return false;
        }
        let age = self.model.age_group;
        let kinds: Vec<PoqKind> = PoqKind::ALL
            .into_iter()
            .filter(|k| {
                self.state.policy.allows(*k)
                    && engine.select_poq(self.state, topic, *k, age).is_some()
            })
            .collect();
        if kinds.is_empty() || self.rng.random::<f64>() >= engine.config.poq_ask_rate {
            return false;
        }
        let kind = *kinds.choose(&mut self.rng).expect("non-empty");
        let item = engine
            .select_poq(self.state, topic, kind, age)
            .expect("eligible kind has an item");
        self.state
            .poq_ledger
            .mark_asked(topic, kind, item.id.clone());
        self.state.phase = Phase::Topic {
            topic: topic.clone(),
            awaiting: Some(item.id.clone()),
        };
        self.state.last_exchange_kind = ExchangeKind::Poq;
        let bank = self.bank;
        let preface = self.pick(&bank.persona.poq_prefaces).to_string();
        self.say(preface);
        self.say(item.question_text.clone());
        self.ann.poq_sequence = Some(PoqAnnotation {
            item_id: item.id.clone(),
            topic: topic.clone(),
            kind,
            step: PoqStep::Ask,
            answer: None,
            abandoned: false,
        });
        self.ann.expects = match kind {
            PoqKind::Wyr => ExpectedInput::WyrAnswer,
            PoqKind::Hyp => ExpectedInput::HypAnswer,
        };
        true
    }

    fn topic_turn(&mut self, topic: TopicId, awaiting: Option<PoqId>, request: Option<TopicId>) {
        let request = request.filter(|r| *r != topic);
        if let Some(item) = awaiting.as_ref().and_then(|id| self.bank.poq(id)) {
            let answer = self.nlu.match_poq_answer(&self.utt, item);
            self.detections.poq_answer = Some(answer.clone());
            self.state.poq_ledger.mark_completed(&item.topic, item.kind);
            self.state.phase = Phase::Topic {
                topic: topic.clone(),
                awaiting: None,
            };
            let mut annotation = PoqAnnotation {
                item_id: item.id.clone(),
                topic: item.topic.clone(),
                kind: item.kind,
                step: PoqStep::Ground,
                answer: Some(answer.clone()),
                abandoned: false,
            };
            if let Some(next) = request {
                annotation.abandoned = true;
                self.request_topic(next, RequestSource::Explicit);
            } else {
                let bank = self.bank;
                let transition = self.pick(&bank.persona.transitions).to_string();
                self.say(assemble_poq_exchange(item, &answer, &transition));
                self.topic_content(topic, false);
            }
            self.ann.poq_sequence = Some(annotation);
            self.state.last_exchange_kind = ExchangeKind::Poq;
            return;
        }
        if let Some(next) = request {
            self.request_topic(next, RequestSource::Explicit);
            return;
        }
        let bank = self.bank;
        let lead = match self.nlu.faq_answer(&self.utt) {
            Some(answer) => answer.to_string(),
            None => self.pick(&bank.persona.reactions).to_string(),
        };
        self.say(lead);
        self.topic_content(topic, true);
    }
}

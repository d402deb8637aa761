//! Per-user personalization record.
//!
//! The model changes only through [`UserModel::apply_event`] (plus the
//! conversation counter bumped by [`UserModel::begin_conversation`]), so any
//! model can be rebuilt by replaying its event log onto a fresh record.

mod store;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::content::{HobbyId, TopicId, TopicRegistry};

pub use store::{
    decode_record, encode_record, FileUserStore, MemoryUserStore, RecordError, StoreError,
    UserLease, UserStore,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeGroup {
    Adult,
    Child,
    #[default]
    Unknown,
}

impl AgeGroup {
    /// Content restrictions apply only to confirmed children.
    pub fn is_child(self) -> bool {
        self == AgeGroup::Child
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeSignal {
    Child,
    Adult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occupation {
    Worker,
    Student,
    NoneStated,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpinionRecord {
    pub topic: Option<TopicId>,
    pub polarity: Polarity,
    pub utterance: String,
    pub turn_index: u32,
}

/// When a hobby was first detected, as a conversation ordinal (1 = the
/// user's first conversation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HobbySighting {
    pub first_seen_conversation: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum UserModelEvent {
    NameStated(String),
    HobbyDetected(HobbyId),
    OpinionStated(OpinionRecord),
    TopicRequested(TopicId),
    AgeSignal(AgeSignal),
    TravelInterest(String),
    OccupationSignal(Occupation),
    AdviceGiven(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserModel {
    pub user_id: String,
    pub name: Option<String>,
    pub age_group: AgeGroup,
    pub hobbies: BTreeMap<HobbyId, HobbySighting>,
    pub topic_interests: BTreeMap<TopicId, i64>,
    pub opinions: Vec<OpinionRecord>,
    pub travel_interests: Vec<String>,
    pub occupation: Occupation,
    pub advice_feedback: Vec<String>,
    pub conversation_count: u32,
}

impl UserModel {
    pub fn new(user_id: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            name: None,
            age_group: AgeGroup::Unknown,
            hobbies: BTreeMap::new(),
            topic_interests: BTreeMap::new(),
            opinions: Vec::new(),
            travel_interests: Vec::new(),
            occupation: Occupation::Unknown,
            advice_feedback: Vec::new(),
            conversation_count: 0,
        }
    }

    pub fn begin_conversation(&mut self) {
        self.conversation_count += 1;
    }

    pub fn interest(&self, topic: &TopicId) -> i64 {
        self.topic_interests.get(topic).copied().unwrap_or(0)
    }

    fn bump_interest(&mut self, topic: &TopicId, delta: i64) {
        *self.topic_interests.entry(topic.clone()).or_insert(0) += delta;
    }

    pub fn apply_event(&mut self, event: &UserModelEvent) {
        match event {
            UserModelEvent::NameStated(name) => self.name = Some(name.clone()),
            UserModelEvent::HobbyDetected(hobby) => {
                let seen = self.conversation_count;
                self.hobbies.entry(hobby.clone()).or_insert(HobbySighting {
                    first_seen_conversation: seen,
                });
            }
            UserModelEvent::OpinionStated(opinion) => {
                if let Some(topic) = &opinion.topic {
                    let delta = match opinion.polarity {
                        Polarity::Positive => 1,
                        Polarity::Negative => -1,
                    };
                    self.bump_interest(topic, delta);
                }
                self.opinions.push(opinion.clone());
            }
            UserModelEvent::TopicRequested(topic) => self.bump_interest(topic, 1),
            UserModelEvent::AgeSignal(signal) => {
                self.age_group = match signal {
                    AgeSignal::Child => AgeGroup::Child,
                    AgeSignal::Adult => AgeGroup::Adult,
                }
            }
            UserModelEvent::TravelInterest(place) => {
                if !self.travel_interests.contains(place) {
                    self.travel_interests.push(place.clone());
                }
            }
            UserModelEvent::OccupationSignal(occupation) => self.occupation = *occupation,
            UserModelEvent::AdviceGiven(text) => self.advice_feedback.push(text.clone()),
        }
    }

    /// Builder-style variant of [`apply_event`](Self::apply_event).
    pub fn applied(mut self, event: &UserModelEvent) -> Self {
        self.apply_event(event);
        self
    }

    /// Topics linked from the user's hobbies, via the gazetteer.
    pub fn linked_topics<'a>(
        &self,
        hobby_links: impl Fn(&HobbyId) -> &'a [TopicId],
    ) -> HashSet<TopicId> {
        self.hobbies
            .keys()
            .flat_map(|h| hobby_links(h).iter().cloned())
            .collect()
    }
}

/// Orders every registry topic for promotion: hobby-linked topics first,
/// then by interest score (highest first), ties in registry order.
pub fn rank_topics(
    model: &UserModel,
    registry: &TopicRegistry,
    linked: &HashSet<TopicId>,
) -> Vec<TopicId> {
    let mut ranked: Vec<(usize, &TopicId)> = registry.ids().enumerate().collect();
    ranked.sort_by(|(ia, a), (ib, b)| {
        let linked_a = linked.contains(*a);
        let linked_b = linked.contains(*b);
        linked_b
            .cmp(&linked_a)
            .then_with(|| model.interest(b).cmp(&model.interest(a)))
            .then_with(|| ia.cmp(ib))
    });
    ranked.into_iter().map(|(_, id)| id.clone()).collect()
}

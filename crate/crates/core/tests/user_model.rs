mod common;

use std::collections::HashSet;
use std::sync::Arc;

use proptest::prelude::*;
use rapport_core::content::{HobbyId, TopicId};
use rapport_core::user::{
    decode_record, encode_record, rank_topics, AgeSignal, FileUserStore, MemoryUserStore,
    Occupation, OpinionRecord, Polarity, StoreError, UserModel, UserModelEvent, UserStore,
};

const TOPICS: [&str; 5] = ["sports", "music", "food", "dinosaurs", "travel"];
const HOBBIES: [&str; 4] = ["swimming", "chess", "gaming", "painting"];

fn event() -> impl Strategy<Value = UserModelEvent> {
    let topic = prop::sample::select(&TOPICS[..]).prop_map(TopicId::new);
    let maybe_topic = prop::option::of(topic.clone());
    prop_oneof![
        "[a-z]{2,8}".prop_map(UserModelEvent::NameStated),
        prop::sample::select(&HOBBIES[..]).prop_map(|h| UserModelEvent::HobbyDetected(HobbyId::new(h))),
        (maybe_topic, any::<bool>(), "[a-z ]{0,20}", 0u32..50).prop_map(|(topic, pos, utterance, turn_index)| {
            UserModelEvent::OpinionStated(OpinionRecord {
                topic,
                polarity: if pos { Polarity::Positive } else { Polarity::Negative },
                utterance,
                turn_index,
            })
        }),
        topic.prop_map(UserModelEvent::TopicRequested),
        any::<bool>().prop_map(|c| UserModelEvent::AgeSignal(if c { AgeSignal::Child } else { AgeSignal::Adult })),
        "[a-z]{3,10}".prop_map(UserModelEvent::TravelInterest),
        prop::sample::select(vec![Occupation::Worker, Occupation::Student, Occupation::NoneStated])
            .prop_map(UserModelEvent::OccupationSignal),
        "[a-z ]{0,30}".prop_map(UserModelEvent::AdviceGiven),
    ]
}

fn replay(events: &[UserModelEvent]) -> UserModel {
    events.iter().fold(UserModel::new("u1"), UserModel::applied)
}

proptest! {
    #[test]
    fn record_encoding_round_trips(events in prop::collection::vec(event(), 0..40)) {
        let model = replay(&events);
        prop_assert_eq!(decode_record(&encode_record(&model)).unwrap(), model);
    }

    #[test]
    fn interest_is_signed_count_of_signals(events in prop::collection::vec(event(), 0..60)) {
        let model = replay(&events);
        for topic in TOPICS.map(TopicId::new) {
            let expected: i64 = events
                .iter()
                .map(|e| match e {
                    UserModelEvent::TopicRequested(t) if *t == topic => 1,
                    UserModelEvent::OpinionStated(o) if o.topic.as_ref() == Some(&topic) => {
                        if o.polarity == Polarity::Positive { 1 } else { -1 }
                    }
                    _ => 0,
                })
                .sum();
            prop_assert_eq!(model.interest(&topic), expected);
        }
        let opinions = events.iter().filter(|e| matches!(e, UserModelEvent::OpinionStated(_))).count();
        prop_assert_eq!(model.opinions.len(), opinions);
    }

    #[test]
    fn repeated_facts_are_idempotent(events in prop::collection::vec(event(), 0..30)) {
        let once = replay(&events);
        let mut twice = once.clone();
        for e in &events {
            if matches!(e, UserModelEvent::HobbyDetected(_) | UserModelEvent::TravelInterest(_)) {
                twice.apply_event(e);
            }
        }
        prop_assert_eq!(&once.hobbies, &twice.hobbies);
        prop_assert_eq!(&once.travel_interests, &twice.travel_interests);
    }

    #[test]
    fn ranking_is_a_permutation_with_linked_first(
        events in prop::collection::vec(event(), 0..40),
        linked in prop::collection::hash_set(prop::sample::select(&TOPICS[..]), 0..3),
    ) {
        let bank = common::bank();
        let model = replay(&events);
        let linked: HashSet<TopicId> = linked.into_iter().map(TopicId::new).collect();
        let ranked = rank_topics(&model, &bank.registry, &linked);
        let mut sorted = ranked.clone();
        sorted.sort();
        let mut all: Vec<TopicId> = bank.registry.ids().cloned().collect();
        all.sort();
        prop_assert_eq!(sorted, all);
        let first_unlinked = ranked.iter().position(|t| !linked.contains(t)).unwrap_or(ranked.len());
        prop_assert!(ranked[first_unlinked..].iter().all(|t| !linked.contains(t)));
        for pair in ranked[first_unlinked..].windows(2) {
            prop_assert!(model.interest(&pair[0]) >= model.interest(&pair[1]));
        }
    }
}

#[test]
fn file_store_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store = FileUserStore::open(dir.path()).unwrap();
    let fresh = store.load("alice").unwrap();
    assert_eq!(fresh, UserModel::new("alice"));
    let model = UserModel::new("alice")
        .applied(&UserModelEvent::NameStated("alice".into()))
        .applied(&UserModelEvent::HobbyDetected(HobbyId::new("chess")))
        .applied(&UserModelEvent::TravelInterest("hawaii".into()));
    store.save(&model).unwrap();
    let reopened = FileUserStore::open(dir.path()).unwrap();
    assert_eq!(reopened.load("alice").unwrap(), model);
}

#[test]
fn leases_are_per_user() {
    let store: Arc<dyn UserStore> = Arc::new(MemoryUserStore::new());
    let lease = store.acquire("a").unwrap();
    assert!(matches!(store.acquire("a"), Err(StoreError::SessionConflict(_))));
    let other = store.acquire("b").unwrap();
    drop(lease);
    assert!(store.acquire("a").is_ok());
    drop(other);
}

#[test]
fn hostile_user_ids_stay_inside_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = FileUserStore::open(dir.path()).unwrap();
    assert!(matches!(store.load(""), Err(StoreError::InvalidUserId(_))));
    let ids = ["../etc/passwd", "a/b", "a_b", "..", "C:\\x"];
    let mut paths = HashSet::new();
    for id in ids {
        let path = store.record_path(id).unwrap();
        assert_eq!(path.parent(), Some(dir.path()), "{id:?}");
        assert!(paths.insert(path), "{id:?} collides");
        store.save(&UserModel::new(id)).unwrap();
        assert_eq!(store.load(id).unwrap().user_id, id);
    }
}

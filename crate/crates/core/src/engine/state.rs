use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::content::{PoqId, PoqKind, TopicId};

/// Which personal opinion question kinds a conversation may ask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoqPolicy {
    pub wyr_enabled: bool,
    pub hyp_enabled: bool,
}

impl PoqPolicy {
    pub const ALL: PoqPolicy = PoqPolicy {
        wyr_enabled: true,
        hyp_enabled: true,
    };
    pub const WYR_ONLY: PoqPolicy = PoqPolicy {
        wyr_enabled: true,
        hyp_enabled: false,
    };
    pub const HYP_ONLY: PoqPolicy = PoqPolicy {
        wyr_enabled: false,
        hyp_enabled: true,
    };
    pub const NONE: PoqPolicy = PoqPolicy {
        wyr_enabled: false,
        hyp_enabled: false,
    };

    pub fn allows(self, kind: PoqKind) -> bool {
        match kind {
            PoqKind::Wyr => self.wyr_enabled,
            PoqKind::Hyp => self.hyp_enabled,
        }
    }
}

impl Default for PoqPolicy {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Phase {
    /// Waiting for the reply to intro step `step`; `attempts` counts
    /// re-asks already spent on it.
    Intro { step: usize, attempts: u8 },
    /// Discussing `topic`; `awaiting` holds a question whose answer is due.
    Topic {
        topic: TopicId,
        awaiting: Option<PoqId>,
    },
    /// A topic menu is on offer; `rejections` counts refused menus.
    Menu { rejections: u8 },
    Closing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeKind {
    Poq,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LedgerEntry {
    Unused,
    Asked(PoqId),
    Completed(PoqId),
}

/// Per (topic, kind) question usage. Entries only move forward:
/// unused, then asked, then completed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PoqLedger {
    entries: BTreeMap<(TopicId, PoqKind), LedgerEntry>,
}

impl PoqLedger {
    pub fn entry(&self, topic: &TopicId, kind: PoqKind) -> &LedgerEntry {
        self.entries
            .get(&(topic.clone(), kind))
            .unwrap_or(&LedgerEntry::Unused)
    }

    pub fn is_unused(&self, topic: &TopicId, kind: PoqKind) -> bool {
        matches!(self.entry(topic, kind), LedgerEntry::Unused)
    }

    /// Records an ask; returns `false` (and changes nothing) unless the
    /// entry was unused.
    pub fn mark_asked(&mut self, topic: &TopicId, kind: PoqKind, item: PoqId) -> bool {
        let slot = self
            .entries
            .entry((topic.clone(), kind))
            .or_insert(LedgerEntry::Unused);
        if *slot != LedgerEntry::Unused {
            return false;
        }
        *slot = LedgerEntry::Asked(item);
        true
    }

    /// Records the answer; returns `false` unless the entry was asked.
    pub fn mark_completed(&mut self, topic: &TopicId, kind: PoqKind) -> bool {
        let Some(slot) = self.entries.get_mut(&(topic.clone(), kind)) else {
            return false;
        };
        if let LedgerEntry::Asked(id) = slot {
            let id = id.clone();
            *slot = LedgerEntry::Completed(id);
            true
        } else {
            false
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(TopicId, PoqKind), &LedgerEntry)> {
        self.entries.iter()
    }

    pub fn completed(&self) -> usize {
        self.entries
            .values()
            .filter(|e| matches!(e, LedgerEntry::Completed(_)))
            .count()
    }
}

#[derive(Debug, Clone)]
pub struct ConversationState {
    pub conversation_id: String,
    pub user_id: String,
    pub phase: Phase,
    pub exchange_count: u32,
    pub poq_ledger: PoqLedger,
    pub last_exchange_kind: ExchangeKind,
    pub menu_offered: Option<Vec<TopicId>>,
    pub rng_seed: u64,
    pub policy: PoqPolicy,
    /// Index of the ice-breaker chosen for this conversation.
    pub icebreaker: usize,
    /// Topics entered in this conversation.
    pub discussed: BTreeSet<TopicId>,
    /// Sub-dialogues delivered so far, per topic.
    pub topic_progress: BTreeMap<TopicId, usize>,
    /// Topics already offered during the current menu cycle.
    pub menu_history: Vec<TopicId>,
    pub last_hobby: Option<String>,
    pub travel: Option<String>,
}

impl ConversationState {
    pub fn new(
        conversation_id: impl Into<String>,
        user_id: impl Into<String>,
        policy: PoqPolicy,
        rng_seed: u64,
    ) -> Self {
        Self {
            conversation_id: conversation_id.into(),
            user_id: user_id.into(),
            phase: Phase::Intro {
                step: 0,
                attempts: 0,
            },
            exchange_count: 0,
            poq_ledger: PoqLedger::default(),
            last_exchange_kind: ExchangeKind::Other,
            menu_offered: None,
            rng_seed,
            policy,
            icebreaker: 0,
            discussed: BTreeSet::new(),
            topic_progress: BTreeMap::new(),
            menu_history: Vec::new(),
            last_hobby: None,
            travel: None,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.phase == Phase::Closing
    }

    pub fn current_topic(&self) -> Option<&TopicId> {
        match &self.phase {
            Phase::Topic { topic, .. } => Some(topic),
            _ => None,
        }
    }

    pub fn progress(&self, topic: &TopicId) -> usize {
        self.topic_progress.get(topic).copied().unwrap_or(0)
    }

    /// The random stream for the current exchange; `salt` separates
    /// independent uses within one exchange.
    pub(crate) fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(mix(
            self.rng_seed,
            (u64::from(self.exchange_count) << 8) ^ salt,
        ))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines two 64-bit values into a well-spread seed.
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b)
}

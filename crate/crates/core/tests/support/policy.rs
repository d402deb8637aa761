//! Opinion-question policy checks over simulated conversations.
#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use rapport_core::content::ContentBank;
use rapport_core::engine::{Annotations, PoqPolicy, PoqStep};
use rapport_core::sim::{SimConfig, Simulation};
use rapport_core::user::AgeGroup;

#[derive(Debug, Clone, Copy, Default)]
pub struct PolicyCounts {
    pub conversations: usize,
    pub asks: usize,
    pub child_asks: usize,
}

/// Simulates `n` conversations with both question kinds on in both arms
/// and a high ask rate, then checks per conversation: at most one ask per
/// (topic, kind); no ask right after another opinion-question exchange;
/// every ask is grounded by the next response, so each sequence spans two
/// exchanges; children only get kid-friendly items.
pub fn check_poq_policy(bank: Arc<ContentBank>, n: usize) -> Result<PolicyCounts, String> {
    let mut config = SimConfig::default();
    config.experiment.arm_a = PoqPolicy::ALL;
    config.experiment.arm_b = PoqPolicy::ALL;
    config.engine.poq_ask_rate = 0.6;
    config.population.child_rate = 0.3;
    config.behavior.poq_length_effect = 3.0;
    let sim = Simulation::new(bank.clone(), config).map_err(|e| e.to_string())?;
    let conversations = sim.run(n);

    let mut counts = PolicyCounts {
        conversations: conversations.len(),
        ..PolicyCounts::default()
    };
    for conv in &conversations {
        let id = conv.transcript.conversation_id();
        let anns: Vec<Annotations> = conv.transcript.records().iter().filter_map(|r| r.agent_annotations()).collect();
        let mut per_topic_kind: HashMap<_, u32> = HashMap::new();
        for (i, ann) in anns.iter().enumerate() {
            let Some(poq) = &ann.poq_sequence else { continue };
            if poq.step != PoqStep::Ask {
                continue;
            }
            counts.asks += 1;
            let count = per_topic_kind.entry((poq.topic.clone(), poq.kind)).or_default();
            *count += 1;
            if *count > 1 {
                return Err(format!("{id}: second {:?} ask on {:?}", poq.kind, poq.topic));
            }
            if i > 0 && anns[i - 1].poq_sequence.is_some() {
                return Err(format!("{id}: ask right after an opinion-question exchange"));
            }
            let ground = anns.get(i + 1).and_then(|next| next.poq_sequence.as_ref());
            match ground {
                Some(g) if g.step == PoqStep::Ground && g.item_id == poq.item_id => {}
                _ => return Err(format!("{id}: ask {} not grounded by the next response", poq.item_id)),
            }
            if conv.profile.age_group == AgeGroup::Child {
                counts.child_asks += 1;
                let item = bank.poq(&poq.item_id).ok_or_else(|| format!("unknown item {}", poq.item_id))?;
                if !item.kid_friendly {
                    return Err(format!("{id}: {} asked to a child", item.id));
                }
            }
        }
    }
    Ok(counts)
}

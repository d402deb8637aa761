mod common;
mod support;

use std::time::Instant;

use support::policy::check_poq_policy;

#[test]
fn poq_policy_holds_over_simulated_conversations() {
    let started = Instant::now();
    let counts = check_poq_policy(common::bank(), 1200).unwrap();
    assert!(counts.asks > 1000, "only {} asks exercised", counts.asks);
    assert!(counts.child_asks > 100, "only {} child asks exercised", counts.child_asks);
    assert!(started.elapsed().as_secs() < 30);
}

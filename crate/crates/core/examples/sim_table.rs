//! Runs a simulated experiment and prints the threshold table.
//!
//! Usage: `sim_table [N] [config.toml] [null]`

use std::sync::Arc;

use rapport_core::content::load_assets;
use rapport_core::experiment::{build_report, records_from_logs, render_table};
use rapport_core::sim::{collect_records, SimConfig, Simulation};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(5000);
    let mut config = match args.get(1).filter(|a| a.ends_with(".toml")) {
        Some(path) => SimConfig::from_toml(&std::fs::read_to_string(path).expect("readable config"))
            .expect("valid config"),
        None => SimConfig::default(),
    };
    if args.iter().any(|a| a == "null") {
        config.behavior = config.behavior.null_effects();
    }
    let bank = Arc::new(load_assets("data").expect("valid bank"));
    let sim = Simulation::new(bank, config.clone()).expect("valid config");
    let convs = sim.run(n);
    let records = records_from_logs(&collect_records(&convs));
    let mean_poq = records.iter().map(|r| r.poq_count as f64).sum::<f64>() / records.len() as f64;
    println!("mean completed poq (all): {mean_poq:.3}");
    let report = build_report(&records, &config.experiment).expect("records");
    print!("{}", render_table(&report));
}

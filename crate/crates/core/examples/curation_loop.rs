//! The iterative collection loop against the simulated trainer, comparing
//! where each strategy spends the same budget.
//!
//! `cargo run --release --example curation_loop [seed]`

use premem::curation::{run_loop, CurationConfig, Strategy};
use premem::simulator::{SimulatedTrainer, SyntheticWorld, WorldConfig};
use premem::MemorizationThreshold;

fn main() {
    let seed: u64 = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed must be an integer"));
    let strategies = [
        Strategy::PremBelowThreshold,
        Strategy::Iid,
        Strategy::IfdTopPercentile { percentile: 10.0 },
        Strategy::HeuristicTopPercentile { percentile: 10.0 },
    ];

    let mut ledgers = Vec::new();
    for strategy in strategies {
        let world = SyntheticWorld::generate(&WorldConfig::curation(), seed).unwrap();
        let p = MemorizationThreshold::new(world.planted_p_star).unwrap();
        let config = CurationConfig::even_batches(strategy, 0.75, 5, 1000).unwrap();
        let ledger = run_loop(&config, p, &mut SimulatedTrainer::new(world)).unwrap();
        ledgers.push((strategy, ledger));
    }

    println!("test accuracy after each training (new examples so far):");
    for (strategy, ledger) in &ledgers {
        let curve: Vec<String> = ledger.learning_curve().iter().map(|(n, acc)| format!("{n}:{acc:.3}")).collect();
        println!("  {:<24} {}", strategy.name(), curve.join("  "));
    }

    let first = &ledgers[0].1.entries[0].plan;
    println!(
        "\nfirst premem plan {} spreads {} examples over {} sources",
        first.plan_id,
        first.requested_count,
        first.selected_example_ids.len()
    );

    let target = ledgers[0].1.initial_test_accuracy + 0.1;
    println!("\nnew examples needed to reach test accuracy {target:.3}:");
    for (strategy, ledger) in &ledgers {
        match ledger.examples_to_reach(target) {
            Some(n) => println!("  {:<24} {n:.0}", strategy.name()),
            None => println!("  {:<24} not reached (final {:.3})", strategy.name(), ledger.final_test_accuracy()),
        }
    }
}

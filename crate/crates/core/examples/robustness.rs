//! Accuracy under perturbed prompts, binned by pre-memorization accuracy.
//!
//! `cargo run --release --example robustness`

use std::collections::BTreeMap;

use premem::robustness::{bin_by_premem, build_perturbed_prompts, degradation_stats, PerturbationSpec};
use premem::simulator::{SyntheticWorld, WorldConfig};
use premem::{pre_memorization_accuracy, ExampleId, MemorizationThreshold};

fn main() {
    let world = SyntheticWorld::generate(&WorldConfig::default(), 3).unwrap();
    let run = world.generate_run();
    let p = MemorizationThreshold::new(world.planted_p_star).unwrap();

    // the prompts an external sampler would evaluate
    let prompts = build_perturbed_prompts(&world.manifest()[..1], &PerturbationSpec::defaults()).unwrap();
    for row in &prompts {
        println!("{:?}", row);
    }

    let premem: BTreeMap<ExampleId, f64> = run
        .trajectories
        .iter()
        .map(|t| (t.example_id().clone(), pre_memorization_accuracy(t, t.final_epoch(), p).unwrap()))
        .collect();
    let bins = bin_by_premem(&premem, 10).unwrap();
    let analysis = degradation_stats(&world.perturbation_records(&run.run_id), &bins).unwrap();

    let tags = &world.dynamics.perturbation_tags;
    print!("\n{:<12} {:>5} {:>9}", "premem", "n", "original");
    for tag in tags {
        print!(" {tag:>13}");
    }
    println!();
    for (i, bin) in analysis.bins.iter().enumerate() {
        let mean = |tag: &str| bin.mean_accuracy_per_variant.get(tag).map_or("-".to_string(), |m| format!("{m:.3}"));
        print!("{:.1}-{:<8.1} {:>5} {:>9}", bin.premem_lo, bin.premem_hi, bin.example_ids.len(), mean("original"));
        for tag in tags {
            let drop = analysis.degradation[tag.as_str()][i].map_or("-".to_string(), |d| format!("-{d:.3}"));
            print!(" {:>6} {drop:>6}", mean(tag));
        }
        println!();
    }
}

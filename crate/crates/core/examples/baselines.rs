//! The comparison metrics: gradient variance, distance from initialization,
//! average thresholded confidence, IFD and solution-length difficulty.
//!
//! `cargo run --example baselines`

use premem::baselines::{
    atc_fit, atc_predict, distance_from_init, gradient_variance, heuristic_difficulty, ifd_score, NumericVector,
    ScoreRecord,
};
use premem::simulator::{generate_suite, SuiteVariation, SyntheticWorld, WorldConfig};
use premem::Split;

fn v(values: &[f64]) -> NumericVector {
    NumericVector::new("w", values.to_vec()).unwrap()
}

fn main() {
    println!("gradient variance of [1,1] and [3,1]: {}", gradient_variance(&[v(&[1.0, 1.0]), v(&[3.0, 1.0])]).unwrap());
    println!("distance from [0,0] to [3,4]: {}", distance_from_init(&v(&[0.0, 0.0]), &v(&[3.0, 4.0])).unwrap());
    println!("IFD with perplexities 2 (given input) and 4 (label only): {}", ifd_score(2.0, 4.0).unwrap());

    let scores = |values: &[f64], split| {
        values
            .iter()
            .enumerate()
            .map(|(i, &score)| ScoreRecord { example_id: premem::ExampleId::new(format!("s{i}")).unwrap(), score, split })
            .collect::<Vec<_>>()
    };
    let fit = atc_fit(&scores(&[0.9, 0.8, 0.6, 0.4], Split::Test), 0.5).unwrap();
    println!("ATC threshold for scores 0.9 0.8 0.6 0.4 at accuracy 0.5: {}", fit.threshold);

    // ATC on simulated runs: fit on one run's test scores, predict the others
    // from their train scores. Memorized train examples are answered
    // confidently, so the train-side prediction runs high.
    let world = SyntheticWorld::generate(&WorldConfig { n_examples: 400, ..WorldConfig::default() }, 1).unwrap();
    let runs = generate_suite(&world, 4, &SuiteVariation::default());
    let last = |run: &premem::simulator::SimulatedRun, split: Split| -> (Vec<ScoreRecord>, f64) {
        let epoch = *run.epochs.last().unwrap();
        let recs: Vec<_> = run.to_records().into_iter().filter(|r| r.split == split && r.epoch == epoch).collect();
        let acc = recs.iter().map(|r| r.accuracy().unwrap()).sum::<f64>() / recs.len() as f64;
        let scores = recs
            .iter()
            .map(|r| ScoreRecord { example_id: r.example_id.clone(), score: r.greedy_loglik.unwrap(), split })
            .collect();
        (scores, acc)
    };
    let (reference, reference_acc) = last(&runs[0], Split::Test);
    let fit = atc_fit(&reference, reference_acc).unwrap();
    println!("\nATC fitted on {} (test accuracy {reference_acc:.3}): threshold {:.4}", runs[0].run_id, fit.threshold);
    for run in &runs[1..] {
        let (train, _) = last(run, Split::Train);
        let (_, test_acc) = last(run, Split::Test);
        println!("  {}: ATC predicts {:.3}, test accuracy {test_acc:.3}", run.run_id, atc_predict(&fit, &train).unwrap());
    }

    println!("\nsolution-length difficulty of the first manifest rows:");
    for row in world.manifest().iter().take(5) {
        println!("  {}: {}", row.example_id, heuristic_difficulty(row).unwrap());
    }
}

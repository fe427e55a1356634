//! Calibrate the memorization threshold on a simulated suite of runs, then
//! check how well it transfers to runs and test examples it never saw.
//!
//! `cargo run --release --example calibrate_suite [seed]`

use premem::calibration::{
    as_pairs, evaluate_heldout, pearson, predict_points, split_runs_calibration, sweep_threshold, ThresholdGrid,
};
use premem::io::{validate, write_log, LogHeader};
use premem::simulator::{generate_suite, SuiteVariation, SyntheticWorld, WorldConfig};

fn main() {
    let seed: u64 = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed must be an integer"));
    let world = SyntheticWorld::generate(&WorldConfig::default(), seed).unwrap();
    let runs = generate_suite(&world, 10, &SuiteVariation::default());
    let observations: Vec<_> = runs.iter().map(|r| r.observation()).collect();
    println!(
        "{} runs x {} examples, planted p* = {}",
        runs.len(),
        world.params.len(),
        world.planted_p_star
    );

    let grid: ThresholdGrid = "1:3:21".parse().unwrap();
    let result = sweep_threshold(&observations, &grid).unwrap();
    println!("\n   p      R²");
    for (p, r2) in grid.values().iter().zip(&result.r2_per_threshold) {
        let mark = if *p == result.selected_p { "  <- selected" } else { "" };
        println!("{p:>5.2} {r2:>8.4}{mark}");
    }

    let points = predict_points(&observations, result.selected_threshold()).unwrap();
    let pairs = as_pairs(&points);
    println!(
        "\n{} checkpoints, Pearson {:.4}, R² against y = x {:.4}",
        pairs.len(),
        pearson(&pairs).unwrap(),
        result.selected_r2
    );

    // calibrate on one run, score the other nine
    let ids: Vec<String> = runs.iter().map(|r| r.run_id.clone()).collect();
    let (cal, held) = split_runs_calibration(&ids, 1, seed).unwrap();
    let pick = |set: &[String]| observations.iter().filter(|o| set.contains(&o.run_id)).cloned().collect::<Vec<_>>();
    let by_runs = evaluate_heldout(&pick(&cal), &pick(&held), &grid).unwrap();
    println!(
        "\ncalibrated on {:?}: p = {}, heldout R² over {} runs = {:.4}",
        cal,
        by_runs.calibration.selected_p,
        held.len(),
        by_runs.heldout_r2
    );

    // calibrate on half of the test examples, score the other half; this
    // goes through the log format since test accuracy is recomputed per subset
    let records: Vec<_> = runs.iter().flat_map(|r| r.to_records()).collect();
    let log = validate(&write_log(&LogHeader::default(), &records), None).unwrap();
    let (a, b) = premem::calibration::split_test_examples(&log.test_example_ids(), 0.5, seed).unwrap();
    let by_tests = evaluate_heldout(&log.observations(Some(&a)).0, &log.observations(Some(&b)).0, &grid).unwrap();
    println!(
        "test-example halves: R² {:.4} on the calibration half, {:.4} on the other",
        by_tests.calibration.selected_r2, by_tests.heldout_r2
    );
}

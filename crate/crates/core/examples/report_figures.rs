//! Static SVG figures: predicted vs. actual test accuracy and the
//! calibration curve.
//!
//! `cargo run --release --example report_figures [out_dir]`

use std::path::PathBuf;

use premem::calibration::{as_pairs, predict_points, sweep_threshold, ThresholdGrid};
use premem::io::svg::{Axis, Figure, Style};
use premem::simulator::{generate_suite, SuiteVariation, SyntheticWorld, WorldConfig};

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/figures".into()));
    std::fs::create_dir_all(&out).unwrap();

    let world = SyntheticWorld::generate(&WorldConfig { n_examples: 500, ..WorldConfig::default() }, 2).unwrap();
    let runs: Vec<_> = generate_suite(&world, 6, &SuiteVariation::default()).iter().map(|r| r.observation()).collect();
    let grid = ThresholdGrid::default();
    let result = sweep_threshold(&runs, &grid).unwrap();
    let points = predict_points(&runs, result.selected_threshold()).unwrap();

    let mut scatter = Figure::new(
        "Test accuracy vs. pre-memorization train accuracy",
        Axis::unit("average pre-memorization train accuracy"),
        Axis::unit("test accuracy"),
    )
    .with_identity_line()
    .annotate(format!("R² = {:.4} at p = {:.3}", result.selected_r2, result.selected_p));
    for run in &runs {
        let pts: Vec<_> = points.iter().filter(|p| p.run_id == run.run_id).cloned().collect();
        scatter = scatter.with_series(run.run_id.clone(), as_pairs(&pts), Style::Markers);
    }
    std::fs::write(out.join("scatter.svg"), scatter.render()).unwrap();

    // the identity-line R² goes very negative at small p; clip for display
    let curve: Vec<(f64, f64)> =
        grid.values().iter().zip(&result.r2_per_threshold).map(|(&p, &r2)| (p, r2.max(-1.0))).collect();
    let fig = Figure::new(
        "R² by memorization threshold",
        Axis::fitted("threshold p", curve.iter().map(|c| c.0)),
        Axis::new("R² (clipped at -1)", -1.05, 1.05),
    )
    .with_series("R²", curve, Style::Line);
    std::fs::write(out.join("calibration_curve.svg"), fig.render()).unwrap();

    println!("selected p = {:.3} (R² {:.4}); wrote {}/scatter.svg and calibration_curve.svg", result.selected_p, result.selected_r2, out.display());
}

//! Writing, validating and reading evaluation logs.
//!
//! `cargo run --example log_pipeline`

use premem::calibration::{as_pairs, predict_points, r2_identity};
use premem::io::{parse_manifest, validate, write_log, write_manifest, LogHeader};
use premem::simulator::{SyntheticWorld, WorldConfig};
use premem::MemorizationThreshold;

fn set_field(line: &str, key: &str, value: serde_json::Value) -> String {
    let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
    v[key] = value;
    v.to_string()
}

fn main() {
    let config = WorldConfig { n_examples: 50, n_test_examples: 40, ..WorldConfig::default() };
    let world = SyntheticWorld::generate(&config, 8).unwrap();
    let run = world.generate_run();

    let mut header = LogHeader::default();
    header.metadata.insert("temperature".into(), 0.8.into());
    let text = write_log(&header, &run.to_records());
    let manifest = write_manifest(&world.manifest());
    println!("log: {} lines; first record:\n  {}", text.lines().count(), text.lines().nth(1).unwrap());

    let rows = parse_manifest(manifest.as_bytes()).unwrap();
    let log = validate(&text, Some(&rows)).unwrap();
    let data = log.run("base").unwrap();
    println!(
        "validated: {} records, run {} with {} train trajectories and {} test records over {} checkpoints",
        log.records.len(),
        data.run_id,
        data.trajectories.len(),
        data.test_records.len(),
        data.epochs.len()
    );

    let (observations, warnings) = log.observations(None);
    for w in &warnings {
        println!("warning: {w}");
    }
    let p = MemorizationThreshold::new(world.planted_p_star).unwrap();
    let points = predict_points(&observations, p).unwrap();
    for pt in points.iter().step_by(3) {
        println!("  epoch {:>4}: premem {:.3}, test {:.3}", pt.epoch, pt.predictor_value, pt.test_accuracy);
    }
    println!("R² against y = x: {:.4}", r2_identity(&as_pairs(&points)).unwrap());

    // every problem is reported, each with its line
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[2] = set_field(&lines[2], "n_correct", 40.into());
    lines[7] = set_field(&lines[7], "target_perplexity", 0.5.into());
    let dup = lines[9].clone();
    lines.push(dup);
    lines[11].truncate(30);
    match validate(&(lines.join("\n") + "\n"), None) {
        Ok(_) => println!("unexpectedly valid"),
        Err(errors) => {
            println!("\n{} problems in the damaged log:", errors.len());
            for e in errors {
                println!("  {e}");
            }
        }
    }
}

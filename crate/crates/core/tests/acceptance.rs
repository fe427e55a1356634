//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints its PASS/FAIL line under a plain `cargo test`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};

use premem::baselines::{atc_fit, atc_predict, distance_from_init, gradient_variance, ifd_score, NumericVector, ScoreRecord};
use premem::calibration::{
    evaluate_heldout, spearman, split_runs_calibration, split_test_examples, sweep_threshold, RunObservation,
    ThresholdGrid,
};
use premem::curation::{run_loop, CurationConfig, CurationLedger, Strategy};
use premem::io::{validate, validate_bytes, write_log, LogHeader};
use premem::robustness::{bin_by_premem, degradation_stats};
use premem::simulator::{generate_suite, SimulatedTrainer, SuiteVariation, SyntheticWorld, WorldConfig};
use premem::{
    average_premem, pre_memorization_accuracy, ExampleId, ExampleTrajectory, MemorizationThreshold, Split,
    TrajectoryPoint, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances and sizes.
const ORACLE_TRAJECTORIES: usize = 1000;
const CAL_RUNS: usize = 10;
const CAL_SEEDS: [u64; 3] = [1, 2, 3];
const CAL_GRID: &str = "1:3:21";
const CAL_GRID_STEP: f64 = 0.1;
const CAL_MIN_R2: f64 = 0.95;
const CAL_ENDPOINT_DROP: f64 = 0.1;
const HELDOUT_MIN_R2: f64 = 0.9;
const HALF_SPLIT_MAX_GAP: f64 = 0.05;
const ATC_TRIALS: usize = 1000;
const ROBUST_BINS: usize = 10;
const ROBUST_MIN_SPEARMAN: f64 = 0.9;
const CURATION_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const CURATION_T: f64 = 0.75;
const CURATION_ITERATIONS: usize = 5;
const CURATION_BUDGET: usize = 1000;
const CURATION_PERCENTILE: f64 = 10.0;
const CURATION_TARGET_GAIN: f64 = 0.1;
const CURATION_MAX_RATIO: f64 = 0.75;
const FUZZ_CASES: usize = 2000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("formula oracle", formula_oracle),
        ("threshold limits", threshold_limits),
        ("calibration recovery", calibration_recovery),
        ("heldout generalization", heldout_generalization),
        ("ATC round-trip", atc_round_trip),
        ("baseline hand values", baseline_hand_values),
        ("robustness monotonicity", robustness_monotonicity),
        ("curation efficiency", curation_efficiency),
        ("determinism", determinism),
        ("validation totality", validation_totality),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    let _ = panic::take_hook();
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn id(s: &str) -> ExampleId {
    ExampleId::new(s).unwrap()
}

/// Accuracies are multiples of 1/16 and perplexities dyadic rationals, so
/// every comparison and min/max is exact.
fn random_trajectory(r: &mut ChaCha8Rng, name: &str) -> (Vec<f64>, Vec<f64>, ExampleTrajectory) {
    let len = r.random_range(1..=12);
    let acc: Vec<f64> = (0..len).map(|_| f64::from(r.random_range(0..=16u32)) / 16.0).collect();
    let perp: Vec<f64> = (0..len).map(|_| 1.0 + f64::from(r.random_range(0..=448u32)) / 64.0).collect();
    let points = (0..len)
        .map(|i| TrajectoryPoint { epoch: (i + 1) as f64 * 0.5, accuracy: acc[i], perplexity: perp[i] })
        .collect();
    (acc, perp, ExampleTrajectory::new(id(name), points).unwrap())
}

/// Straight from the definition: best accuracy over checkpoints up to `m`
/// whose perplexity is above `p` (zero otherwise), capped by accuracy at `m`.
fn oracle_premem(acc: &[f64], perp: &[f64], p: f64, m: usize) -> f64 {
    let mut best = 0.0_f64;
    for j in 0..=m {
        let masked = if perp[j] <= p { 0.0 } else { acc[j] };
        if masked > best {
            best = masked;
        }
    }
    if acc[m] < best {
        acc[m]
    } else {
        best
    }
}

#[allow(clippy::needless_range_loop)]
fn formula_oracle() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    let mut run = Vec::new();
    let mut oracle_final = Vec::new();
    for n in 0..ORACLE_TRAJECTORIES {
        let (acc, perp, traj) = random_trajectory(&mut r, &format!("e{n:04}"));
        let p = 1.0 + f64::from(r.random_range(0..=448u32)) / 64.0;
        let thr = MemorizationThreshold::new(p).unwrap();
        let curve = traj.premem_curve(thr);
        for m in 0..acc.len() {
            let want = oracle_premem(&acc, &perp, p, m);
            let epoch = traj.points()[m].epoch;
            let got = pre_memorization_accuracy(&traj, epoch, thr).unwrap();
            // between checkpoints the value is that of the preceding one
            let between = pre_memorization_accuracy(&traj, epoch + 0.25, thr).unwrap();
            ensure(
                got.to_bits() == want.to_bits() && curve[m].to_bits() == want.to_bits() && between.to_bits() == want.to_bits(),
                || format!("trajectory {n} checkpoint {m}: got {got}/{}/{between}, oracle {want}", curve[m]),
            )?;
            checked += 1;
        }
        if n < 200 {
            oracle_final.push(oracle_premem(&acc, &perp, 3.0, acc.len() - 1));
            run.push(traj);
        }
    }
    // the run average at a late epoch, accumulated in id order
    let avg = average_premem(&run, 100.0, MemorizationThreshold::new(3.0).unwrap()).unwrap();
    let want = oracle_final.iter().sum::<f64>() / oracle_final.len() as f64;
    ensure(avg.to_bits() == want.to_bits(), || format!("average {avg} vs oracle {want}"))?;
    Ok(format!("{ORACLE_TRAJECTORIES} trajectories, {checked} checkpoints bitwise equal"))
}

fn threshold_limits() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(12);
    let below = MemorizationThreshold::new(0.5).unwrap();
    for n in 0..ORACLE_TRAJECTORIES {
        let (acc, perp, traj) = random_trajectory(&mut r, "x");
        let max_perp = perp.iter().copied().fold(1.0, f64::max);
        let above = MemorizationThreshold::new(max_perp).unwrap();
        for m in 0..acc.len() {
            let epoch = traj.points()[m].epoch;
            let prefix_max = acc[..=m].iter().copied().fold(0.0, f64::max);
            let low = pre_memorization_accuracy(&traj, epoch, below).unwrap();
            ensure(low == prefix_max.min(acc[m]), || format!("trajectory {n} checkpoint {m}: p < 1 gave {low}"))?;
            let high = pre_memorization_accuracy(&traj, epoch, above).unwrap();
            ensure(high == 0.0, || format!("trajectory {n} checkpoint {m}: p >= max perplexity gave {high}"))?;
        }
    }
    Ok(format!("{ORACLE_TRAJECTORIES} trajectories at p = 0.5 and p = max perplexity"))
}

fn suite_observations(seed: u64) -> (SyntheticWorld, Vec<RunObservation>) {
    let world = SyntheticWorld::generate(&WorldConfig::default(), seed).unwrap();
    let runs = generate_suite(&world, CAL_RUNS, &SuiteVariation::default());
    let obs = runs.iter().map(|r| r.observation()).collect();
    (world, obs)
}

fn calibration_recovery() -> Outcome {
    let grid: ThresholdGrid = CAL_GRID.parse().unwrap();
    let mut details = Vec::new();
    for seed in CAL_SEEDS {
        let (world, obs) = suite_observations(seed);
        let p_star = world.planted_p_star;
        let result = sweep_threshold(&obs, &grid).map_err(|e| e.to_string())?;
        let star = grid
            .values()
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - p_star).abs().total_cmp(&(b.1 - p_star).abs()))
            .unwrap()
            .0;
        let r2_star = result.r2_per_threshold[star];
        let (first, last) = (result.r2_per_threshold[0], result.r2_per_threshold[grid.values().len() - 1]);
        ensure((result.selected_p - p_star).abs() <= CAL_GRID_STEP + 1e-9, || {
            format!("seed {seed}: selected p {} vs planted {p_star}", result.selected_p)
        })?;
        ensure(r2_star >= CAL_MIN_R2, || format!("seed {seed}: R² at p* is {r2_star}"))?;
        ensure(first <= r2_star - CAL_ENDPOINT_DROP && last <= r2_star - CAL_ENDPOINT_DROP, || {
            format!("seed {seed}: endpoint R² {first} and {last} vs {r2_star} at p*")
        })?;
        details.push(format!("seed {seed}: p {} R² {r2_star:.4} (ends {first:.3}, {last:.3})", result.selected_p));
    }
    Ok(details.join("; "))
}

fn heldout_generalization() -> Outcome {
    let grid: ThresholdGrid = CAL_GRID.parse().unwrap();
    let (world, obs) = suite_observations(CAL_SEEDS[0]);

    let ids: Vec<String> = obs.iter().map(|o| o.run_id.clone()).collect();
    let (cal_ids, held_ids) = split_runs_calibration(&ids, 1, 0).unwrap();
    let pick = |want: &[String]| obs.iter().filter(|o| want.contains(&o.run_id)).cloned().collect::<Vec<_>>();
    let by_runs = evaluate_heldout(&pick(&cal_ids), &pick(&held_ids), &grid).map_err(|e| e.to_string())?;
    ensure(held_ids.len() == CAL_RUNS - 1, || format!("{} heldout runs", held_ids.len()))?;
    ensure(by_runs.heldout_r2 >= HELDOUT_MIN_R2, || {
        format!("p {} from run {:?}: heldout R² {}", by_runs.calibration.selected_p, cal_ids, by_runs.heldout_r2)
    })?;

    // test-example halves go through the log path: records, validation,
    // then per-subset test means
    let runs = generate_suite(&world, CAL_RUNS, &SuiteVariation::default());
    let records: Vec<_> = runs.iter().flat_map(|r| r.to_records()).collect();
    let log = validate(&write_log(&LogHeader::default(), &records), None).map_err(|e| format!("{e:?}"))?;
    let (cal_half, held_half) = split_test_examples(&log.test_example_ids(), 0.5, 0).unwrap();
    let (cal_obs, _) = log.observations(Some(&cal_half));
    let (held_obs, _) = log.observations(Some(&held_half));
    let by_tests = evaluate_heldout(&cal_obs, &held_obs, &grid).map_err(|e| e.to_string())?;
    let gap = (by_tests.heldout_r2 - by_tests.calibration.selected_r2).abs();
    ensure(gap <= HALF_SPLIT_MAX_GAP, || {
        format!("calibration half R² {} vs heldout half {}", by_tests.calibration.selected_r2, by_tests.heldout_r2)
    })?;
    Ok(format!(
        "1 run -> 9 heldout R² {:.4}; test halves R² {:.4} vs {:.4}",
        by_runs.heldout_r2, by_tests.calibration.selected_r2, by_tests.heldout_r2
    ))
}

fn scores(values: &[f64], split: Split) -> Vec<ScoreRecord> {
    values
        .iter()
        .enumerate()
        .map(|(i, &score)| ScoreRecord { example_id: id(&format!("s{i}")), score, split })
        .collect()
}

fn atc_round_trip() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(15);
    let mut worst = 0.0_f64;
    for trial in 0..ATC_TRIALS {
        let n = r.random_range(1..=200);
        let mut values: Vec<f64> = (0..n).map(|_| r.random_range(-10.0..0.0)).collect();
        let distinct: BTreeSet<u64> = values.iter().map(|v| v.to_bits()).collect();
        if distinct.len() != n {
            values.clear();
            values.extend(distinct.iter().map(|&b| f64::from_bits(b)));
        }
        let acc = r.random_range(0.0..=1.0);
        let fit = atc_fit(&scores(&values, Split::Test), acc).map_err(|e| e.to_string())?;
        let predicted = atc_predict(&fit, &scores(&values, Split::Train)).map_err(|e| e.to_string())?;
        let err = (predicted - acc).abs();
        worst = worst.max(err * values.len() as f64);
        ensure(err <= 1.0 / values.len() as f64 + 1e-12, || {
            format!("trial {trial}: |S| = {}, accuracy {acc}, predicted {predicted}", values.len())
        })?;
    }
    let hand = atc_fit(&scores(&[0.9, 0.8, 0.6, 0.4], Split::Test), 0.5).unwrap();
    ensure(hand.threshold == 0.7, || format!("hand threshold {}", hand.threshold))?;
    let back = atc_predict(&hand, &scores(&[0.9, 0.8, 0.6, 0.4], Split::Train)).unwrap();
    ensure(back == 0.5, || format!("hand round trip {back}"))?;
    Ok(format!("{ATC_TRIALS} random sets, worst error {worst:.3}/|S|; hand threshold 0.7"))
}

fn baseline_hand_values() -> Outcome {
    let v = |xs: &[f64]| NumericVector::new("v", xs.to_vec()).unwrap();
    let gv = gradient_variance(&[v(&[1.0, 1.0]), v(&[3.0, 1.0])]).unwrap();
    let dist = distance_from_init(&v(&[0.0, 0.0]), &v(&[3.0, 4.0])).unwrap();
    let ifd = ifd_score(2.0, 4.0).unwrap();
    ensure(gv == 0.5 && dist == 25.0 && ifd == 0.5, || format!("got {gv}, {dist}, {ifd}"))?;
    Ok("gradient variance 0.5, distance 25, IFD 0.5".into())
}

fn robustness_monotonicity() -> Outcome {
    let world = SyntheticWorld::generate(&WorldConfig::default(), 17).unwrap();
    let run = world.generate_run();
    let p_star = MemorizationThreshold::new(world.planted_p_star).unwrap();
    let premem: BTreeMap<ExampleId, f64> = run
        .trajectories
        .iter()
        .map(|t| (t.example_id().clone(), pre_memorization_accuracy(t, t.final_epoch(), p_star).unwrap()))
        .collect();
    let bins = bin_by_premem(&premem, ROBUST_BINS).unwrap();
    let analysis = degradation_stats(&world.perturbation_records(&run.run_id), &bins).map_err(|e| e.to_string())?;

    let original = &analysis.degradation[Variant::ORIGINAL_TAG];
    ensure(original.iter().flatten().all(|&d| d == 0.0), || format!("original degradation {original:?}"))?;
    let mut details = Vec::new();
    for tag in &world.dynamics.perturbation_tags {
        let points: Vec<(f64, f64)> = analysis
            .bins
            .iter()
            .enumerate()
            .filter_map(|(i, b)| Some((i as f64, *b.mean_accuracy_per_variant.get(tag)?)))
            .collect();
        let rho = spearman(&points).map_err(|e| e.to_string())?;
        ensure(rho >= ROBUST_MIN_SPEARMAN, || format!("{tag}: Spearman {rho} over {} bins", points.len()))?;
        details.push(format!("{tag} Spearman {rho:.3} over {} bins", points.len()));
    }
    Ok(format!("{}; original degradation 0", details.join(", ")))
}

fn curation_ledger(seed: u64, strategy: Strategy) -> CurationLedger {
    let world = SyntheticWorld::generate(&WorldConfig::curation(), seed).unwrap();
    let p = MemorizationThreshold::new(world.planted_p_star).unwrap();
    let config = CurationConfig::even_batches(strategy, CURATION_T, CURATION_ITERATIONS, CURATION_BUDGET).unwrap();
    run_loop(&config, p, &mut SimulatedTrainer::new(world)).unwrap()
}

fn curation_efficiency() -> Outcome {
    let (mut premem_total, mut iid_total) = (0.0, 0.0);
    let mut finals = [0.0; 4];
    for seed in CURATION_SEEDS {
        let premem = curation_ledger(seed, Strategy::PremBelowThreshold);
        let iid = curation_ledger(seed, Strategy::Iid);
        let ifd = curation_ledger(seed, Strategy::IfdTopPercentile { percentile: CURATION_PERCENTILE });
        let heuristic = curation_ledger(seed, Strategy::HeuristicTopPercentile { percentile: CURATION_PERCENTILE });
        ensure(premem.initial_test_accuracy == iid.initial_test_accuracy, || "worlds differ across strategies".into())?;

        let target = premem.initial_test_accuracy + CURATION_TARGET_GAIN;
        let needed = premem.examples_to_reach(target).ok_or_else(|| {
            format!("seed {seed}: premem never reached {target:.4} (final {:.4})", premem.final_test_accuracy())
        })?;
        // iid missing the target counts as the full budget, a lower bound
        let iid_needed = iid.examples_to_reach(target).unwrap_or(CURATION_BUDGET as f64);
        premem_total += needed;
        iid_total += iid_needed;

        let top = premem.final_test_accuracy();
        ensure(top >= ifd.final_test_accuracy() && top >= heuristic.final_test_accuracy(), || {
            format!(
                "seed {seed}: premem final {top:.4} vs ifd {:.4}, heuristic {:.4}",
                ifd.final_test_accuracy(),
                heuristic.final_test_accuracy()
            )
        })?;
        for (slot, ledger) in finals.iter_mut().zip([&premem, &iid, &ifd, &heuristic]) {
            *slot += ledger.final_test_accuracy() / CURATION_SEEDS.len() as f64;
        }
    }
    let ratio = premem_total / iid_total;
    ensure(ratio <= CURATION_MAX_RATIO, || format!("premem/iid examples to target {ratio:.3}"))?;
    Ok(format!(
        "premem/iid examples to target {ratio:.3}; mean final accuracy premem {:.3}, iid {:.3}, ifd {:.3}, heuristic {:.3}",
        finals[0], finals[1], finals[2], finals[3]
    ))
}

fn premem_bin(dir: &Path, args: &[&str]) -> Result<i32, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_premem"))
        .args(args)
        .current_dir(dir)
        .env_remove("PREMEM_OUT_DIR")
        .env_remove("PREMEM_LOG")
        .output()
        .map_err(|e| e.to_string())?;
    Ok(out.status.code().unwrap_or(-1))
}

/// Every subcommand, with paths relative to `dir` so the tables can be
/// compared byte for byte across directories.
fn cli_pipeline(dir: &Path) -> Result<(), String> {
    let steps: &[(&[&str], i32)] = &[
        (&["simulate", "--seed", "5", "--examples", "300", "--runs", "4", "--out", "sim"], 0),
        (&["validate", "--log", "sim/log.ndjson", "--manifest", "sim/manifest.ndjson", "--out", "val"], 0),
        (&["premem", "--log", "sim/log.ndjson", "--p", "2", "--out", "pm"], 0),
        (&["calibrate", "--log", "sim/log.ndjson", "--grid", "1:3:21", "--out", "cal"], 0),
        (&["calibrate", "--log", "sim/log.ndjson", "--grid", "1:3:11", "--calibration-runs", "2", "--seed", "3", "--out", "cal_runs"], 0),
        (&["calibrate", "--log", "sim/log.ndjson", "--grid", "1:16:9log", "--test-split", "0.5", "--seed", "3", "--out", "cal_split"], 0),
        (&["predict", "--log", "sim/log.ndjson", "--calibration", "cal/calibration.json", "--out", "pred"], 0),
        (&["baselines", "atc", "--log", "sim/log.ndjson", "--reference-run", "run00", "--out", "atc"], 0),
        (&["baselines", "heuristic", "--manifest", "sim/manifest.ndjson", "--out", "heur"], 0),
        (&["baselines", "grad-var", "--snapshot", "g1.vec", "--snapshot", "g2.vec", "--out", "gv"], 0),
        (&["baselines", "distance", "--init", "g1.vec", "--final", "g2.vec", "--out", "dist"], 0),
        (&["baselines", "ifd", "--input", "ifd_in.csv", "--out", "ifd"], 0),
        (&["robustness", "prompts", "--manifest", "sim/manifest.ndjson", "--out", "prompts"], 0),
        (&["robustness", "analyze", "--log", "sim/log.ndjson", "--p", "2", "--run", "base", "--out", "rob"], 0),
        (&["curate", "plan", "--log", "sim/log.ndjson", "--run", "base", "--p", "2", "--strategy", "premem", "--count", "50", "--out", "plan"], 0),
        (&["curate", "plan", "--log", "sim/log.ndjson", "--run", "base", "--strategy", "iid", "--count", "50", "--out", "plan_iid"], 0),
        (&["curate", "loop", "--seed", "2", "--examples", "200", "--budget", "100", "--iterations", "2", "--out", "loop"], 0),
        (&["report", "--input", "cal", "--out", "fig_cal"], 0),
        (&["report", "--input", "rob", "--out", "fig_rob"], 0),
        (&["report", "--input", "loop", "--out", "fig_loop"], 0),
    ];
    fs::write(dir.join("g1.vec"), "3\n0.5\n-1.25\n2\n").unwrap();
    fs::write(dir.join("g2.vec"), "3\n1.5\n0.25\n-2\n").unwrap();
    fs::write(dir.join("ifd_in.csv"), "example_id,perp_label_given_input,perp_label_only\nex00000,2,4\nex00001,3.5,2\n").unwrap();
    for (args, want) in steps {
        let code = premem_bin(dir, args)?;
        ensure(code == *want, || format!("premem {} exited {code}", args.join(" ")))?;
    }
    Ok(())
}

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    for seed in [0, 9] {
        let config = WorldConfig { n_examples: 300, ..WorldConfig::default() };
        let a = SyntheticWorld::generate(&config, seed).unwrap();
        let b = SyntheticWorld::generate(&config, seed).unwrap();
        let (ja, jb) = (serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        ensure(ja == jb, || format!("seed {seed}: worlds differ"))?;
        let (ra, rb) = (generate_suite(&a, 3, &SuiteVariation::default()), generate_suite(&b, 3, &SuiteVariation::default()));
        for (x, y) in ra.iter().zip(&rb) {
            let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
            ensure(x == y && bits(&x.test_accuracy) == bits(&y.test_accuracy), || format!("seed {seed}: run {} differs", x.run_id))?;
        }
    }

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cli_pipeline(a.path())?;
    cli_pipeline(b.path())?;
    let (fa, fb) = (files_under(a.path()), files_under(b.path()));
    ensure(fa.keys().eq(fb.keys()), || "different output file sets".into())?;
    for (name, bytes) in &fa {
        ensure(&fb[name] == bytes, || format!("{name} differs between identical runs"))?;
    }
    let tables = fa.keys().filter(|k| k.ends_with(".csv") || k.ends_with(".json") || k.ends_with(".ndjson")).count();
    Ok(format!("simulator bit-identical for 2 seeds; {} CLI outputs ({tables} tables) byte-identical", fa.len()))
}

/// A small valid log: train records grouped by example then epoch, then
/// test records.
fn base_log_lines() -> Vec<String> {
    let config = WorldConfig {
        n_examples: 6,
        n_test_examples: 3,
        epochs: vec![1.0, 2.0, 3.0, 4.0],
        ..WorldConfig::default()
    };
    let world = SyntheticWorld::generate(&config, 4).unwrap();
    let text = write_log(&LogHeader::default(), &world.generate_run().to_records());
    text.lines().map(str::to_string).collect()
}

fn validation_totality() -> Outcome {
    let base = base_log_lines();
    ensure(validate(&(base.join("\n") + "\n"), None).is_ok(), || "base log does not validate".into())?;
    let train_lines: Vec<usize> = (1..base.len()).filter(|&i| base[i].contains(r#""split":"train""#)).collect();
    let mut r = ChaCha8Rng::seed_from_u64(20);
    let mut kinds = BTreeMap::<&str, usize>::new();

    for case in 0..FUZZ_CASES {
        let mut lines = base.clone();
        // 1-based line that must be reported, if the mutation pins one
        let (kind, expect_line, expect_text): (&str, Option<usize>, &str) = match case % 5 {
            0 => {
                let i = r.random_range(1..lines.len());
                let cut = r.random_range(0..lines[i].len());
                lines[i].truncate(cut);
                ("truncated line", Some(i + 1), "")
            }
            1 => {
                let i = r.random_range(1..lines.len());
                let n: u32 = 16;
                let k = n + r.random_range(1..=5u32);
                lines[i] = lines[i]
                    .split(',')
                    .map(|f| if f.starts_with(r#""n_correct":"#) { format!(r#""n_correct":{k}"#) } else { f.to_string() })
                    .collect::<Vec<_>>()
                    .join(",");
                ("inverted counts", Some(i + 1), "")
            }
            2 => {
                let i = train_lines[r.random_range(0..train_lines.len())];
                lines.remove(i);
                ("checkpoint gap", None, "checkpoint gap")
            }
            3 => {
                let i = r.random_range(1..lines.len());
                let j = r.random_range(i + 1..=lines.len());
                let dup = lines[i].clone();
                lines.insert(j, dup);
                ("duplicate key", Some(j + 1), "duplicate key")
            }
            _ => {
                let mut bytes = (lines.join("\n") + "\n").into_bytes();
                for _ in 0..r.random_range(1..=8) {
                    let at = r.random_range(0..bytes.len());
                    bytes[at] = r.random();
                }
                let result = panic::catch_unwind(|| validate_bytes(&bytes, None)).map_err(|_| format!("case {case}: panic on byte noise"))?;
                if let Err(errs) = result {
                    ensure(!errs.is_empty() && errs.iter().all(|e| e.line.is_some()), || {
                        format!("case {case}: byte noise gave {errs:?}")
                    })?;
                }
                *kinds.entry("byte noise").or_default() += 1;
                continue;
            }
        };
        let text = lines.join("\n") + "\n";
        let errs = match panic::catch_unwind(|| validate(&text, None)) {
            Err(_) => return Err(format!("case {case} ({kind}): validation panicked")),
            Ok(Ok(_)) => return Err(format!("case {case} ({kind}): malformed log accepted")),
            Ok(Err(errs)) => errs,
        };
        ensure(!errs.is_empty() && errs.iter().all(|e| e.line.is_some()), || format!("case {case} ({kind}): {errs:?}"))?;
        if let Some(line) = expect_line {
            ensure(errs.iter().any(|e| e.line == Some(line)), || format!("case {case} ({kind}): line {line} not reported in {errs:?}"))?;
        }
        ensure(errs.iter().any(|e| e.message.contains(expect_text)), || format!("case {case} ({kind}): {errs:?}"))?;
        *kinds.entry(kind).or_default() += 1;
    }

    let empty = validate_bytes(b"", None).err().unwrap_or_default();
    ensure(empty.len() == 1, || format!("empty log: {empty:?}"))?;
    let summary: Vec<String> = kinds.iter().map(|(k, n)| format!("{n} {k}")).collect();
    Ok(format!("{FUZZ_CASES} malformed logs ({}), all errors line-numbered", summary.join(", ")))
}

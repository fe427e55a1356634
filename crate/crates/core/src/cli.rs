//! The `premem` command-line front end.
//!
//! Every subcommand reads its inputs, runs one library operation (or a short
//! composition of them) and writes tables to `--out`. Exit status is 0 on
//! success, 1 when an input fails validation or the operation errors, and 2
//! on usage errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::baselines::{
    atc_fit, atc_predict, distance_from_init, gradient_variance, heuristic_difficulty, ifd_score, ScoreRecord,
};
use crate::calibration::{
    as_pairs, evaluate_heldout, pearson, predict_points, r2_fitted_line, r2_identity, spearman,
    split_runs_calibration, split_test_examples, sweep_threshold, Checkpoint, RunCheckpointPoint, RunObservation,
    ThresholdGrid,
};
use crate::curation::{make_plan, premem_scores, run_loop, CurationConfig, ScoreMap, Strategy};
use crate::io::svg::{Axis, Figure, Style};
use crate::io::{
    format_number, ingest, parse_manifest, parse_plan, parse_vector, validate_bytes, write_log, write_manifest,
    write_plan, Cell, LogHeader, ManifestRow, Precision, RunData, Table, ValidatedLog, ValidationError,
};
use crate::robustness::{bin_by_premem, build_perturbed_prompts, degradation_stats, PerturbationSpec};
use crate::simulator::{generate_suite, SimulatedTrainer, SuiteVariation, SyntheticWorld, WorldConfig};
use crate::trajectory::{
    average_premem, generalization_gap, pre_memorization_accuracy, EvalRecord, ExampleId, MemorizationThreshold,
    Split, Variant,
};

/// `println!` that ignores a closed stdout instead of panicking.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "premem", version, about = "Pre-memorization train accuracy diagnostics for finetuning logs")]
pub struct Cli {
    /// Directory outputs are written to; created if missing.
    #[arg(long, global = true, env = "PREMEM_OUT_DIR", default_value = ".")]
    pub out: PathBuf,

    /// Write table numbers at full precision instead of 6 significant digits.
    #[arg(long, global = true)]
    pub full_precision: bool,

    /// Log verbosity (off, error, warn, info, debug, trace).
    #[arg(long, global = true, env = "PREMEM_LOG", default_value = "warn")]
    pub log_level: log::LevelFilter,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a log (and optionally its manifest) and report every problem.
    Validate(InputArgs),
    /// Per-example and per-checkpoint pre-memorization accuracy.
    Premem {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        threshold: ThresholdArgs,
    },
    /// Sweep the memorization threshold for the best fit to test accuracy.
    Calibrate(CalibrateArgs),
    /// Predict test accuracy at every checkpoint from average pre-memorization accuracy.
    Predict {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        threshold: ThresholdArgs,
    },
    /// Prior generalization metrics and difficulty scores.
    #[command(subcommand)]
    Baselines(BaselineCommand),
    /// Perturbed-prompt export and accuracy degradation by pre-memorization bin.
    #[command(subcommand)]
    Robustness(RobustnessCommand),
    /// Curation plans, ingestion of collected data, and the simulated loop.
    #[command(subcommand)]
    Curate(CurateCommand),
    /// Generate a synthetic world and write it as a log, manifest and suite table.
    Simulate(SimulateArgs),
    /// Render SVG figures from tables written by other subcommands.
    Report {
        /// Directory holding predictions, calibration, ledger or robustness tables.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Evaluation log (newline-delimited records after a header line).
    #[arg(long)]
    pub log: PathBuf,
    /// Dataset manifest; train example ids are cross-checked against it.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ThresholdArgs {
    /// Memorization threshold on target perplexity.
    #[arg(long, value_parser = positive)]
    pub p: Option<f64>,
    /// `calibration.json` from `calibrate`; its selected threshold is used.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = false, multiple = false)]
pub struct OptionalThresholdArgs {
    #[arg(long, value_parser = positive)]
    pub p: Option<f64>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Threshold grid, `lo:hi:n` (linear) or `lo:hi:nlog` (log-spaced).
    #[arg(long, default_value = "1:16:61log")]
    pub grid: ThresholdGrid,
    /// Calibrate on this many randomly chosen runs and score the rest.
    #[arg(long, conflicts_with = "test_split")]
    pub calibration_runs: Option<usize>,
    /// Calibrate on this fraction of test examples and score the other part.
    #[arg(long)]
    pub test_split: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum BaselineCommand {
    /// Mean per-element population variance across gradient snapshots.
    GradVar {
        /// Vector files, one per snapshot (at least two).
        #[arg(long = "snapshot", required = true, num_args = 1..)]
        snapshots: Vec<PathBuf>,
    },
    /// Sum of squared differences between initial and final weights.
    Distance {
        #[arg(long)]
        init: PathBuf,
        #[arg(long = "final")]
        final_weights: PathBuf,
    },
    /// Average thresholded confidence over greedy-response log-likelihoods.
    Atc {
        #[command(flatten)]
        input: InputArgs,
        /// Run whose test-split scores fit the threshold.
        #[arg(long)]
        reference_run: String,
        /// Checkpoint of the reference run; defaults to its last test checkpoint.
        #[arg(long)]
        reference_epoch: Option<f64>,
        /// Known test accuracy of the reference; defaults to the logged mean.
        #[arg(long)]
        reference_accuracy: Option<f64>,
    },
    /// IFD ratio from a CSV with example_id, perp_label_given_input, perp_label_only.
    Ifd {
        #[arg(long)]
        input: PathBuf,
    },
    /// Solution line count, or difficulty level, per manifest row.
    Heuristic {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum RobustnessCommand {
    /// Prompts an external sampler needs to evaluate perturbed variants.
    Prompts {
        #[arg(long)]
        manifest: PathBuf,
        /// `tag=preamble text`; repeatable. Defaults to "First" and "We know that".
        #[arg(long = "preamble", value_parser = preamble)]
        preambles: Vec<PerturbationSpec>,
    },
    /// Bin examples by pre-memorization accuracy and compare variant accuracy.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        threshold: ThresholdArgs,
        /// Run holding perturbed records; needed when several runs do.
        #[arg(long)]
        run: Option<String>,
        /// Checkpoint to analyze; defaults to the last one with perturbed records.
        #[arg(long)]
        epoch: Option<f64>,
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum StrategyArg {
    Premem,
    Iid,
    Ifd,
    Heuristic,
}

impl StrategyArg {
    fn strategy(self, percentile: f64) -> Strategy {
        match self {
            StrategyArg::Premem => Strategy::PremBelowThreshold,
            StrategyArg::Iid => Strategy::Iid,
            StrategyArg::Ifd => Strategy::IfdTopPercentile { percentile },
            StrategyArg::Heuristic => Strategy::HeuristicTopPercentile { percentile },
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum CurateCommand {
    /// Write the collection plan for one iteration from a trained run's log.
    Plan {
        #[command(flatten)]
        input: InputArgs,
        /// Needed for the premem strategy.
        #[command(flatten)]
        threshold: OptionalThresholdArgs,
        #[arg(long)]
        run: Option<String>,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// Examples with pre-memorization accuracy strictly below this are selected.
        #[arg(long, default_value_t = 0.75)]
        t: f64,
        /// Top percentile kept by the ifd and heuristic strategies.
        #[arg(long, default_value_t = 10.0)]
        percentile: f64,
        /// Number of new examples to request.
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        iteration: usize,
        /// IFD scores (example_id, ifd) as written by `baselines ifd`.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Check newly collected examples against their plan.
    Ingest {
        #[arg(long)]
        plan: PathBuf,
        /// Newline-delimited collected examples.
        #[arg(long)]
        examples: PathBuf,
        /// Current dataset manifest; new ids must not collide with it.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Run the full collection loop against the simulated trainer (curation world unless --config).
    Loop(LoopArgs),
}

#[derive(Debug, Args)]
pub struct WorldArgs {
    #[arg(long)]
    pub seed: u64,
    /// World configuration JSON; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub examples: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub p_star: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
}

impl WorldArgs {
    fn world(&self, default: WorldConfig) -> anyhow::Result<SyntheticWorld> {
        let mut cfg = match &self.config {
            Some(path) => serde_json::from_slice::<WorldConfig>(&read(path)?)
                .with_context(|| format!("parsing world config {}", path.display()))?,
            None => default,
        };
        if let Some(n) = self.examples {
            cfg.n_examples = n;
        }
        if let Some(p) = self.p_star {
            cfg.planted_p_star = p;
        }
        if let Some(s) = self.sigma {
            cfg.noise_sigma = s;
        }
        Ok(SyntheticWorld::generate(&cfg, self.seed)?)
    }
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    /// Strategies to run, each in a fresh copy of the world.
    #[arg(long, value_enum, num_args = 1.., default_values = ["premem", "iid", "ifd", "heuristic"])]
    pub strategy: Vec<StrategyArg>,
    #[arg(long, default_value_t = 0.75)]
    pub t: f64,
    #[arg(long, default_value_t = 5)]
    pub iterations: usize,
    /// Total new examples, split evenly across iterations.
    #[arg(long, default_value_t = 1000)]
    pub budget: usize,
    #[arg(long, default_value_t = 10.0)]
    pub percentile: f64,
    /// Threshold for the premem strategy; defaults to the planted one.
    #[arg(long, value_parser = positive)]
    pub p: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    /// Runs in the suite, besides the base run.
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
}

/// Contents of `calibration.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub selected_p: f64,
    pub selected_r2: f64,
    pub grid: Vec<f64>,
    pub r2_per_threshold: Vec<f64>,
    /// `all`, `runs` or `test-split`.
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub calibration_runs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub heldout_runs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_split_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heldout_r2: Option<f64>,
}

/// Contents of `prediction_summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub p: f64,
    pub n_checkpoints: usize,
    pub n_with_test_accuracy: usize,
    pub r2_identity: Option<f64>,
    pub r2_fitted_line: Option<f64>,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Failure::Usage(msg.into()).into()
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("{s:?} is not a positive number")),
    }
}

fn preamble(s: &str) -> Result<PerturbationSpec, String> {
    let (tag, text) = s.split_once('=').ok_or_else(|| format!("{s:?} is not tag=text"))?;
    Ok(PerturbationSpec::new(tag, text))
}

/// Parses the process arguments and runs the command.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    let _ = env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).try_init();
    run(&cli)
}

pub fn run(cli: &Cli) -> ExitCode {
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<Failure>() {
            Some(Failure::Usage(msg)) => {
                eprintln!("usage error: {msg}");
                ExitCode::from(2)
            }
            Some(Failure::Invalid(msg)) => {
                eprintln!("{msg}");
                ExitCode::from(1)
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}

struct Output {
    dir: PathBuf,
    precision: Precision,
}

impl Output {
    fn path(&self, name: &str) -> anyhow::Result<PathBuf> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        Ok(self.dir.join(name))
    }

    fn text(&self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.path(name)?;
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    fn table(&self, name: &str, table: &Table) -> anyhow::Result<()> {
        self.text(name, &table.to_csv(self.precision))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }

    fn num(&self, v: f64) -> String {
        format_number(v, self.precision)
    }
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let out = Output {
        dir: cli.out.clone(),
        precision: if cli.full_precision { Precision::Full } else { Precision::Significant6 },
    };
    match &cli.command {
        Command::Validate(input) => cmd_validate(input, &out),
        Command::Premem { input, threshold } => cmd_premem(input, threshold, &out),
        Command::Calibrate(args) => cmd_calibrate(args, &out),
        Command::Predict { input, threshold } => cmd_predict(input, threshold, &out),
        Command::Baselines(cmd) => cmd_baselines(cmd, &out),
        Command::Robustness(cmd) => cmd_robustness(cmd, &out),
        Command::Curate(cmd) => cmd_curate(cmd, &out),
        Command::Simulate(args) => cmd_simulate(args, &out),
        Command::Report { input } => cmd_report(input, &out),
    }
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn render_errors(path: &Path, errors: &[ValidationError]) -> String {
    let mut lines: Vec<String> = errors
        .iter()
        .map(|e| match e.line {
            Some(line) => format!("{}:{line}: {}", path.display(), e.message),
            None => format!("{}: {}", path.display(), e.message),
        })
        .collect();
    lines.push(format!("{} problem(s) in {}", errors.len(), path.display()));
    lines.join("\n")
}

fn load_manifest(path: &Path) -> anyhow::Result<Vec<ManifestRow>> {
    parse_manifest(&read(path)?).map_err(|errs| Failure::Invalid(render_errors(path, &errs)).into())
}

fn load(input: &InputArgs) -> anyhow::Result<ValidatedLog> {
    let manifest = input.manifest.as_deref().map(load_manifest).transpose()?;
    validate_bytes(&read(&input.log)?, manifest.as_deref())
        .map_err(|errs| Failure::Invalid(render_errors(&input.log, &errs)).into())
}

fn threshold_from(p: Option<f64>, calibration: Option<&Path>) -> anyhow::Result<Option<MemorizationThreshold>> {
    let value = match (p, calibration) {
        (Some(p), _) => p,
        (None, Some(path)) => {
            let file: CalibrationFile = serde_json::from_slice(&read(path)?)
                .with_context(|| format!("parsing calibration file {}", path.display()))?;
            file.selected_p
        }
        (None, None) => return Ok(None),
    };
    Ok(Some(MemorizationThreshold::new(value)?))
}

fn threshold(args: &ThresholdArgs) -> anyhow::Result<MemorizationThreshold> {
    threshold_from(args.p, args.calibration.as_deref())?.ok_or_else(|| usage("pass --p or --calibration"))
}

fn pick_run<'a>(
    log: &'a ValidatedLog,
    run: Option<&str>,
    candidates: impl Fn(&RunData) -> bool,
) -> anyhow::Result<&'a RunData> {
    if let Some(id) = run {
        return log.run(id).ok_or_else(|| usage(format!("log has no run {id:?}")));
    }
    let found: Vec<&RunData> = log.runs.values().filter(|r| candidates(r)).collect();
    match found.as_slice() {
        [one] => Ok(one),
        [] => Err(usage("no suitable run in the log")),
        many => Err(usage(format!(
            "log has {} candidate runs ({}); pass --run",
            many.len(),
            many.iter().map(|r| r.run_id.as_str()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn cmd_validate(input: &InputArgs, out: &Output) -> anyhow::Result<()> {
    let mut table = Table::new(["file", "line", "message"]);
    let mut problems = Vec::new();
    let manifest = match &input.manifest {
        Some(path) => match parse_manifest(&read(path)?) {
            Ok(rows) => Some(rows),
            Err(errs) => {
                problems.push(render_errors(path, &errs));
                push_errors(&mut table, path, &errs);
                None
            }
        },
        None => None,
    };
    let summary = match validate_bytes(&read(&input.log)?, manifest.as_deref()) {
        Ok(log) => {
            let examples: BTreeSet<&ExampleId> = log.records.iter().map(|r| &r.example_id).collect();
            serde_json::json!({
                "records": log.records.len(),
                "runs": log.runs.len(),
                "examples": examples.len(),
                "errors": table.rows.len(),
            })
        }
        Err(errs) => {
            problems.push(render_errors(&input.log, &errs));
            push_errors(&mut table, &input.log, &errs);
            serde_json::json!({ "errors": table.rows.len() })
        }
    };
    out.table("validation_errors.csv", &table)?;
    out.json("validation_summary.json", &summary)?;
    if problems.is_empty() {
        say!("{}: ok", input.log.display());
        Ok(())
    } else {
        Err(Failure::Invalid(problems.join("\n")).into())
    }
}

fn push_errors(table: &mut Table, path: &Path, errs: &[ValidationError]) {
    for e in errs {
        table.push(vec![
            path.display().to_string().into(),
            e.line.map_or(Cell::Empty, Cell::from),
            e.message.clone().into(),
        ]);
    }
}

fn mean_train_accuracy(run: &RunData, epoch: f64) -> f64 {
    let mut ordered: Vec<_> = run.trajectories.iter().collect();
    ordered.sort_by(|a, b| a.example_id().cmp(b.example_id()));
    let total: f64 = ordered
        .iter()
        .filter_map(|t| t.points().iter().find(|pt| pt.epoch == epoch))
        .map(|pt| pt.accuracy)
        .sum();
    total / ordered.len() as f64
}

fn test_accuracy_by_epoch(run: &RunData) -> BTreeMap<u64, f64> {
    let (obs, _) = run.observation(None);
    obs.checkpoints.iter().map(|c| (c.epoch.to_bits(), c.test_accuracy)).collect()
}

fn cmd_premem(input: &InputArgs, args: &ThresholdArgs, out: &Output) -> anyhow::Result<()> {
    let log = load(input)?;
    let p = threshold(args)?;
    let mut per_example = Table::new([
        "run_id",
        "example_id",
        "final_epoch",
        "final_accuracy",
        "final_perplexity",
        "memorized_at",
        "premem",
    ]);
    let mut per_checkpoint =
        Table::new(["run_id", "epoch", "premem_avg", "train_accuracy", "test_accuracy", "generalization_gap"]);
    for run in log.runs.values().filter(|r| !r.trajectories.is_empty()) {
        let mut ordered: Vec<_> = run.trajectories.iter().collect();
        ordered.sort_by(|a, b| a.example_id().cmp(b.example_id()));
        for traj in ordered {
            let last = traj.points()[traj.points().len() - 1];
            let memorized_at = traj.points().iter().find(|pt| pt.perplexity <= p.value()).map(|pt| pt.epoch);
            per_example.push(vec![
                run.run_id.clone().into(),
                traj.example_id().to_string().into(),
                last.epoch.into(),
                last.accuracy.into(),
                last.perplexity.into(),
                memorized_at.into(),
                pre_memorization_accuracy(traj, last.epoch, p)?.into(),
            ]);
        }
        let tests = test_accuracy_by_epoch(run);
        let mut last_avg = 0.0;
        for &epoch in &run.epochs {
            let avg = average_premem(&run.trajectories, epoch, p)?;
            let train = mean_train_accuracy(run, epoch);
            let test = tests.get(&epoch.to_bits()).copied();
            per_checkpoint.push(vec![
                run.run_id.clone().into(),
                epoch.into(),
                avg.into(),
                train.into(),
                test.into(),
                test.map(|t| generalization_gap(train, t)).into(),
            ]);
            last_avg = avg;
        }
        say!(
            "{}: average pre-memorization accuracy {} at epoch {} (p = {})",
            run.run_id,
            out.num(last_avg),
            out.num(run.epochs[run.epochs.len() - 1]),
            out.num(p.value())
        );
    }
    if per_checkpoint.rows.is_empty() {
        bail!("log has no train trajectories");
    }
    out.table("premem_per_example.csv", &per_example)?;
    out.table("premem_per_checkpoint.csv", &per_checkpoint)
}

fn with_trajectories(obs: Vec<RunObservation>) -> Vec<RunObservation> {
    obs.into_iter().filter(|o| !o.trajectories.is_empty()).collect()
}

fn fit_stats(points: &[(f64, f64)]) -> [Option<f64>; 3] {
    [r2_identity(points).ok(), r2_fitted_line(points).ok(), pearson(points).ok()]
}

fn cmd_calibrate(args: &CalibrateArgs, out: &Output) -> anyhow::Result<()> {
    let log = load(&args.input)?;
    let grid = &args.grid;
    let (cal, held, mut file) = if let Some(k) = args.calibration_runs {
        let (all, _) = log.observations(None);
        let all = with_trajectories(all);
        let ids: Vec<String> = all.iter().map(|o| o.run_id.clone()).collect();
        let (cal_ids, held_ids) = split_runs_calibration(&ids, k, args.seed)?;
        let (cal, held): (Vec<_>, Vec<_>) = all.into_iter().partition(|o| cal_ids.contains(&o.run_id));
        let file = CalibrationFile {
            mode: "runs".into(),
            seed: Some(args.seed),
            calibration_runs: cal_ids,
            heldout_runs: held_ids,
            ..empty_calibration_file()
        };
        (cal, Some(held), file)
    } else if let Some(fraction) = args.test_split {
        let (cal_ids, held_ids) = split_test_examples(&log.test_example_ids(), fraction, args.seed)?;
        let cal = with_trajectories(log.observations(Some(&cal_ids)).0);
        let held = with_trajectories(log.observations(Some(&held_ids)).0);
        let file = CalibrationFile {
            mode: "test-split".into(),
            seed: Some(args.seed),
            calibration_runs: cal.iter().map(|o| o.run_id.clone()).collect(),
            test_split_fraction: Some(fraction),
            ..empty_calibration_file()
        };
        (cal, Some(held), file)
    } else {
        let cal = with_trajectories(log.observations(None).0);
        let file = CalibrationFile {
            mode: "all".into(),
            calibration_runs: cal.iter().map(|o| o.run_id.clone()).collect(),
            ..empty_calibration_file()
        };
        (cal, None, file)
    };

    let result = match &held {
        Some(held) => {
            let eval = evaluate_heldout(&cal, held, grid)?;
            file.heldout_r2 = Some(eval.heldout_r2);
            eval.calibration
        }
        None => sweep_threshold(&cal, grid)?,
    };

    let mut curve = Table::new(["p", "r2_identity", "r2_fitted_line", "pearson", "heldout_r2_identity"]);
    for (&p, &r2) in grid.values().iter().zip(&result.r2_per_threshold) {
        let threshold = MemorizationThreshold::new(p)?;
        let [_, fitted, corr] = fit_stats(&as_pairs(&predict_points(&cal, threshold)?));
        let heldout = match &held {
            Some(h) => r2_identity(&as_pairs(&predict_points(h, threshold)?)).ok(),
            None => None,
        };
        curve.push(vec![p.into(), r2.into(), fitted.into(), corr.into(), heldout.into()]);
    }

    let p = result.selected_threshold();
    let mut predictions = Table::new(["run_id", "epoch", "set", "premem_avg", "test_accuracy"]);
    let sets: [(&str, &[RunObservation]); 2] = [
        (if held.is_some() { "calibration" } else { "all" }, &cal),
        ("heldout", held.as_deref().unwrap_or(&[])),
    ];
    for (set, runs) in sets {
        for pt in predict_points(runs, p)? {
            predictions.push(vec![
                pt.run_id.into(),
                pt.epoch.into(),
                set.into(),
                pt.predictor_value.into(),
                pt.test_accuracy.into(),
            ]);
        }
    }

    file.selected_p = result.selected_p;
    file.selected_r2 = result.selected_r2;
    file.grid = grid.values().to_vec();
    file.r2_per_threshold = result.r2_per_threshold.clone();

    say!("selected p = {} (R² = {})", out.num(file.selected_p), out.num(file.selected_r2));
    if let Some(h) = file.heldout_r2 {
        say!("heldout R² = {}", out.num(h));
    }
    out.table("calibration_curve.csv", &curve)?;
    out.table("predictions.csv", &predictions)?;
    out.json("calibration.json", &file)
}

fn empty_calibration_file() -> CalibrationFile {
    CalibrationFile {
        selected_p: 0.0,
        selected_r2: 0.0,
        grid: Vec::new(),
        r2_per_threshold: Vec::new(),
        mode: String::new(),
        seed: None,
        calibration_runs: Vec::new(),
        heldout_runs: Vec::new(),
        test_split_fraction: None,
        heldout_r2: None,
    }
}

fn cmd_predict(input: &InputArgs, args: &ThresholdArgs, out: &Output) -> anyhow::Result<()> {
    let log = load(input)?;
    let p = threshold(args)?;
    // every train checkpoint gets a prediction; test accuracy is NaN where unmeasured
    let runs: Vec<RunObservation> = log
        .runs
        .values()
        .filter(|r| !r.trajectories.is_empty())
        .map(|r| {
            let tests = test_accuracy_by_epoch(r);
            RunObservation {
                run_id: r.run_id.clone(),
                trajectories: r.trajectories.clone(),
                checkpoints: r
                    .epochs
                    .iter()
                    .map(|&epoch| Checkpoint {
                        epoch,
                        test_accuracy: tests.get(&epoch.to_bits()).copied().unwrap_or(f64::NAN),
                    })
                    .collect(),
            }
        })
        .collect();
    if runs.is_empty() {
        bail!("log has no train trajectories");
    }
    let points = predict_points(&runs, p)?;
    let mut table = Table::new(["run_id", "epoch", "set", "premem_avg", "test_accuracy"]);
    for pt in &points {
        let test = Some(pt.test_accuracy).filter(|t| !t.is_nan());
        table.push(vec![
            pt.run_id.clone().into(),
            pt.epoch.into(),
            "all".into(),
            pt.predictor_value.into(),
            test.into(),
        ]);
    }
    let measured: Vec<&RunCheckpointPoint> = points.iter().filter(|pt| !pt.test_accuracy.is_nan()).collect();
    let pairs: Vec<(f64, f64)> = measured.iter().map(|pt| (pt.predictor_value, pt.test_accuracy)).collect();
    let [r2, fitted, corr] = fit_stats(&pairs);
    let summary = PredictionSummary {
        p: p.value(),
        n_checkpoints: points.len(),
        n_with_test_accuracy: pairs.len(),
        r2_identity: r2,
        r2_fitted_line: fitted,
        pearson: corr,
        spearman: spearman(&pairs).ok(),
    };
    match summary.r2_identity {
        Some(r2) => say!("{} checkpoints predicted, R² = {}", points.len(), out.num(r2)),
        None => say!("{} checkpoints predicted", points.len()),
    }
    out.table("predictions.csv", &table)?;
    out.json("prediction_summary.json", &summary)
}

fn cmd_baselines(cmd: &BaselineCommand, out: &Output) -> anyhow::Result<()> {
    match cmd {
        BaselineCommand::GradVar { snapshots } => {
            let vectors = snapshots
                .iter()
                .map(|path| Ok(parse_vector(&path.display().to_string(), &read(path)?)?))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let value = gradient_variance(&vectors)?;
            let mut t = Table::new(["n_snapshots", "n_elements", "gradient_variance"]);
            t.push(vec![vectors.len().into(), vectors[0].len().into(), value.into()]);
            say!("gradient variance = {}", out.num(value));
            out.table("baseline_gradient_variance.csv", &t)
        }
        BaselineCommand::Distance { init, final_weights } => {
            let a = parse_vector("init", &read(init)?)?;
            let b = parse_vector("final", &read(final_weights)?)?;
            let value = distance_from_init(&a, &b)?;
            let mut t = Table::new(["n_elements", "distance_from_init"]);
            t.push(vec![a.len().into(), value.into()]);
            say!("distance from init = {}", out.num(value));
            out.table("baseline_distance_from_init.csv", &t)
        }
        BaselineCommand::Atc { input, reference_run, reference_epoch, reference_accuracy } => {
            cmd_atc(input, reference_run, *reference_epoch, *reference_accuracy, out)
        }
        BaselineCommand::Ifd { input } => {
            #[derive(Deserialize)]
            struct Row {
                example_id: String,
                perp_label_given_input: f64,
                perp_label_only: f64,
            }
            let mut reader = csv::Reader::from_path(input).with_context(|| format!("reading {}", input.display()))?;
            let mut t = Table::new(["example_id", "ifd"]);
            for (i, row) in reader.deserialize::<Row>().enumerate() {
                let row = row.with_context(|| format!("{}: row {}", input.display(), i + 2))?;
                let score = ifd_score(row.perp_label_given_input, row.perp_label_only)
                    .with_context(|| format!("{}: example {}", input.display(), row.example_id))?;
                t.push(vec![row.example_id.into(), score.into()]);
            }
            out.table("baseline_ifd.csv", &t)
        }
        BaselineCommand::Heuristic { manifest } => {
            let rows = load_manifest(manifest)?;
            let mut t = Table::new(["example_id", "heuristic_difficulty"]);
            for row in &rows {
                t.push(vec![row.example_id.to_string().into(), heuristic_difficulty(row)?.into()]);
            }
            out.table("baseline_heuristic.csv", &t)
        }
    }
}

fn scores_at(log: &ValidatedLog, run_id: &str, epoch: f64, split: Split) -> anyhow::Result<Vec<ScoreRecord>> {
    log.records_at(run_id, epoch)
        .into_iter()
        .filter(|r| r.split == split && r.variant == Variant::Original)
        .map(|r| {
            let score = r.greedy_loglik.with_context(|| {
                format!("run {run_id} epoch {epoch}: example {} has no greedy_loglik", r.example_id)
            })?;
            Ok(ScoreRecord { example_id: r.example_id.clone(), score, split })
        })
        .collect()
}

fn cmd_atc(
    input: &InputArgs,
    reference_run: &str,
    reference_epoch: Option<f64>,
    reference_accuracy: Option<f64>,
    out: &Output,
) -> anyhow::Result<()> {
    let log = load(input)?;
    let run = log.run(reference_run).ok_or_else(|| usage(format!("log has no run {reference_run:?}")))?;
    let tests = test_accuracy_by_epoch(run);
    let epoch = match reference_epoch {
        Some(e) => e,
        None => match tests.keys().map(|&b| f64::from_bits(b)).reduce(f64::max) {
            Some(e) => e,
            None => bail!("reference run {reference_run} has no test records"),
        },
    };
    let accuracy = match reference_accuracy.or_else(|| tests.get(&epoch.to_bits()).copied()) {
        Some(a) => a,
        None => bail!("reference run {reference_run} has no test records at epoch {epoch}"),
    };
    let fit = atc_fit(&scores_at(&log, reference_run, epoch, Split::Test)?, accuracy)?;

    let mut t = Table::new(["run_id", "epoch", "atc_prediction", "test_accuracy"]);
    for run in log.runs.values() {
        let tests = test_accuracy_by_epoch(run);
        for &e in &run.epochs {
            let target = scores_at(&log, &run.run_id, e, Split::Train)?;
            t.push(vec![
                run.run_id.clone().into(),
                e.into(),
                atc_predict(&fit, &target)?.into(),
                tests.get(&e.to_bits()).copied().into(),
            ]);
        }
    }
    say!("ATC threshold = {} (reference accuracy {})", out.num(fit.threshold), out.num(accuracy));
    out.table("baseline_atc.csv", &t)?;
    out.json(
        "atc_threshold.json",
        &serde_json::json!({
            "threshold": fit.threshold,
            "reference_accuracy": fit.reference_accuracy,
            "reference_run": reference_run,
            "reference_epoch": epoch,
        }),
    )
}

fn cmd_robustness(cmd: &RobustnessCommand, out: &Output) -> anyhow::Result<()> {
    match cmd {
        RobustnessCommand::Prompts { manifest, preambles } => {
            let rows = load_manifest(manifest)?;
            let specs = if preambles.is_empty() { PerturbationSpec::defaults() } else { preambles.clone() };
            let prompts = build_perturbed_prompts(&rows, &specs)?;
            let mut text = String::new();
            for p in &prompts {
                text.push_str(&serde_json::to_string(p)?);
                text.push('\n');
            }
            say!("{} prompts for {} examples", prompts.len(), rows.len());
            out.text("perturbed_prompts.ndjson", &text)
        }
        RobustnessCommand::Analyze { input, threshold: args, run, epoch, bins } => {
            let log = load(input)?;
            let p = threshold(args)?;
            let perturbed: BTreeSet<&str> = log
                .records
                .iter()
                .filter(|r| r.split == Split::Train && r.variant != Variant::Original)
                .map(|r| r.run_id.as_str())
                .collect();
            let run = pick_run(&log, run.as_deref(), |r| perturbed.contains(r.run_id.as_str()))?;
            let epoch = match epoch {
                Some(e) => *e,
                None => log
                    .records
                    .iter()
                    .filter(|r| r.run_id == run.run_id && r.variant != Variant::Original)
                    .map(|r| r.epoch)
                    .reduce(f64::max)
                    .with_context(|| format!("run {} has no perturbed records", run.run_id))?,
            };
            analyze_robustness(&log, run, epoch, p, *bins, out)
        }
    }
}

fn analyze_robustness(
    log: &ValidatedLog,
    run: &RunData,
    epoch: f64,
    p: MemorizationThreshold,
    n_bins: usize,
    out: &Output,
) -> anyhow::Result<()> {
    let premem = run
        .trajectories
        .iter()
        .map(|t| Ok((t.example_id().clone(), pre_memorization_accuracy(t, epoch, p)?)))
        .collect::<crate::Result<BTreeMap<_, _>>>()?;
    let records: Vec<EvalRecord> = log
        .records_at(&run.run_id, epoch)
        .into_iter()
        .filter(|r| r.split == Split::Train)
        .cloned()
        .collect();
    let analysis = degradation_stats(&records, &bin_by_premem(&premem, n_bins)?)?;
    let accuracy: BTreeMap<(&ExampleId, &str), f64> = records
        .iter()
        .filter_map(|r| Some(((&r.example_id, r.variant.tag()), r.accuracy().ok()?)))
        .collect();

    let mut bins = Table::new([
        "bin",
        "premem_lo",
        "premem_hi",
        "n_examples",
        "variant",
        "n_values",
        "mean_accuracy",
        "degradation",
    ]);
    let mut values = Table::new(["bin", "variant", "example_id", "accuracy"]);
    for (i, bin) in analysis.bins.iter().enumerate() {
        for (variant, vals) in &bin.accuracy_values_per_variant {
            bins.push(vec![
                i.into(),
                bin.premem_lo.into(),
                bin.premem_hi.into(),
                bin.example_ids.len().into(),
                variant.clone().into(),
                vals.len().into(),
                bin.mean_accuracy_per_variant.get(variant).copied().into(),
                analysis.degradation.get(variant).and_then(|d| d[i]).into(),
            ]);
            for id in &bin.example_ids {
                if let Some(&a) = accuracy.get(&(id, variant.as_str())) {
                    values.push(vec![i.into(), variant.clone().into(), id.to_string().into(), a.into()]);
                }
            }
        }
    }

    let mut trend = BTreeMap::new();
    for variant in analysis.degradation.keys() {
        let pts: Vec<(f64, f64)> = analysis
            .bins
            .iter()
            .enumerate()
            .filter_map(|(i, b)| Some((i as f64, *b.mean_accuracy_per_variant.get(variant)?)))
            .collect();
        trend.insert(variant.clone(), spearman(&pts).ok());
    }
    for (variant, rho) in &trend {
        match rho {
            Some(r) => say!("{variant}: Spearman(bin, mean accuracy) = {}", out.num(*r)),
            None => say!("{variant}: trend undefined"),
        }
    }
    out.table("robustness_bins.csv", &bins)?;
    out.table("robustness_values.csv", &values)?;
    out.json(
        "robustness_summary.json",
        &serde_json::json!({
            "run_id": run.run_id,
            "epoch": epoch,
            "p": p.value(),
            "bins": n_bins,
            "spearman_bin_vs_accuracy": trend,
            "warnings": analysis.warnings,
        }),
    )
}

fn cmd_curate(cmd: &CurateCommand, out: &Output) -> anyhow::Result<()> {
    match cmd {
        CurateCommand::Plan { input, threshold, run, strategy, t, percentile, count, iteration, scores } => {
            let log = load(input)?;
            let run = pick_run(&log, run.as_deref(), |r| !r.trajectories.is_empty())?;
            let dataset: Vec<ExampleId> = run.trajectories.iter().map(|t| t.example_id().clone()).collect();
            let in_dataset: BTreeSet<&ExampleId> = dataset.iter().collect();
            let score_map: ScoreMap = match strategy {
                StrategyArg::Premem => {
                    let p = threshold_from(threshold.p, threshold.calibration.as_deref())?
                        .ok_or_else(|| usage("the premem strategy needs --p or --calibration"))?;
                    premem_scores(&run.trajectories, p)?
                }
                StrategyArg::Iid => ScoreMap::new(),
                StrategyArg::Ifd => {
                    let path = scores.as_deref().ok_or_else(|| usage("the ifd strategy needs --scores"))?;
                    let table = Table::read(path)?;
                    let (Some(id_col), Some(score_col)) = (table.column("example_id"), table.column("ifd")) else {
                        bail!("{} lacks example_id/ifd columns", path.display());
                    };
                    let mut map = ScoreMap::new();
                    for row in &table.rows {
                        let id = match &row[id_col] {
                            Cell::Text(s) => s.clone(),
                            Cell::Num(v) => v.to_string(),
                            _ => bail!("{}: empty example_id", path.display()),
                        };
                        let Cell::Num(v) = row[score_col] else {
                            bail!("{}: example {id} has no numeric ifd", path.display());
                        };
                        map.insert(ExampleId::new(id)?, v);
                    }
                    map
                }
                StrategyArg::Heuristic => {
                    let path = input.manifest.as_deref().ok_or_else(|| usage("the heuristic strategy needs --manifest"))?;
                    let mut map = ScoreMap::new();
                    for row in load_manifest(path)? {
                        map.insert(row.example_id.clone(), heuristic_difficulty(&row)?);
                    }
                    map
                }
            };
            let score_map: ScoreMap = score_map.into_iter().filter(|(id, _)| in_dataset.contains(id)).collect();
            let config = CurationConfig {
                threshold_t: *t,
                iterations_n: *iteration,
                batch_sizes: vec![*count; *iteration],
                strategy: strategy.strategy(*percentile),
            };
            let plan = make_plan(&config, *iteration, &run.run_id, &dataset, &score_map)?;
            say!(
                "plan {}: {} of {} examples selected, {} new examples requested",
                plan.plan_id,
                plan.selected_example_ids.len(),
                dataset.len(),
                plan.requested_count
            );
            out.text("plan.ndjson", &write_plan(&plan))
        }
        CurateCommand::Ingest { plan, examples, manifest } => {
            let parsed = parse_plan(&read(plan)?).with_context(|| format!("parsing plan {}", plan.display()))?;
            let existing = manifest.as_deref().map(load_manifest).transpose()?;
            let report = ingest(&parsed, &read(examples)?, existing.as_deref());
            let mut t = Table::new(["status", "example_id", "source_example_id", "line", "message"]);
            for a in &report.accepted {
                t.push(vec![
                    "accepted".into(),
                    a.example_id.to_string().into(),
                    a.source_example_id.to_string().into(),
                    Cell::Empty,
                    Cell::Empty,
                ]);
            }
            for r in &report.rejected {
                t.push(vec![
                    "rejected".into(),
                    Cell::Empty,
                    Cell::Empty,
                    r.line.map_or(Cell::Empty, Cell::from),
                    r.message.clone().into(),
                ]);
            }
            out.table("ingested.csv", &t)?;
            out.text("manifest_additions.ndjson", &write_manifest(&report.manifest_rows()))?;
            say!("{} accepted, {} rejected", report.accepted.len(), report.rejected.len());
            if report.rejected.is_empty() {
                Ok(())
            } else {
                Err(Failure::Invalid(render_errors(examples, &report.rejected)).into())
            }
        }
        CurateCommand::Loop(args) => cmd_loop(args, out),
    }
}

fn cmd_loop(args: &LoopArgs, out: &Output) -> anyhow::Result<()> {
    let world = args.world.world(WorldConfig::curation())?;
    let p = MemorizationThreshold::new(args.p.unwrap_or(world.planted_p_star))?;
    let mut t = Table::new([
        "strategy",
        "iteration",
        "run_id",
        "plan_id",
        "selected_examples",
        "new_examples",
        "cumulative_new_examples",
        "test_accuracy",
    ]);
    let mut seen = BTreeSet::new();
    for &arg in args.strategy.iter().filter(|s| seen.insert(**s)) {
        let strategy = arg.strategy(args.percentile);
        let config = CurationConfig::even_batches(strategy, args.t, args.iterations, args.budget)?;
        let mut trainer = SimulatedTrainer::new(world.clone());
        let ledger = run_loop(&config, p, &mut trainer)?;
        t.push(vec![
            strategy.name().into(),
            0usize.into(),
            ledger.initial_run_id.clone().into(),
            Cell::Empty,
            Cell::Empty,
            0usize.into(),
            0usize.into(),
            ledger.initial_test_accuracy.into(),
        ]);
        for e in &ledger.entries {
            t.push(vec![
                strategy.name().into(),
                e.plan.iteration_index.into(),
                e.resulting_run_id.clone().into(),
                e.plan.plan_id.clone().into(),
                e.plan.selected_example_ids.len().into(),
                e.ingested.len().into(),
                e.cumulative_new_examples.into(),
                e.resulting_test_accuracy.into(),
            ]);
        }
        say!(
            "{}: test accuracy {} -> {} with {} new examples",
            strategy.name(),
            out.num(ledger.initial_test_accuracy),
            out.num(ledger.final_test_accuracy()),
            ledger.total_new_examples()
        );
    }
    out.table("curation_ledger.csv", &t)
}

fn cmd_simulate(args: &SimulateArgs, out: &Output) -> anyhow::Result<()> {
    let world = args.world.world(WorldConfig::default())?;
    let p_star = MemorizationThreshold::new(world.planted_p_star)?;
    let base = world.generate_run();
    let suite = generate_suite(&world, args.runs, &SuiteVariation::default());

    let mut records = base.to_records();
    records.extend(world.perturbation_records(&base.run_id).into_iter().filter(|r| r.variant != Variant::Original));
    let mut table = Table::new([
        "run_id",
        "rise_rate_multiplier",
        "mem_epoch_multiplier",
        "epoch",
        "test_accuracy",
        "premem_avg_at_p_star",
    ]);
    for run in std::iter::once(&base).chain(&suite) {
        if run.run_id != base.run_id {
            records.extend(run.to_records());
        }
        for (&epoch, &acc) in run.epochs.iter().zip(&run.test_accuracy) {
            table.push(vec![
                run.run_id.clone().into(),
                run.variation.rise_rate_multiplier.into(),
                run.variation.mem_epoch_multiplier.into(),
                epoch.into(),
                acc.into(),
                average_premem(&run.trajectories, epoch, p_star)?.into(),
            ]);
        }
    }
    let mut header = LogHeader::default();
    header.metadata.insert("generator".into(), "premem simulate".into());
    header.metadata.insert("seed".into(), args.world.seed.into());
    header.metadata.insert("samples_per_eval".into(), world.samples_per_eval.into());
    say!(
        "world with {} examples, planted p* = {}, {} runs plus base",
        world.params.len(),
        out.num(world.planted_p_star),
        suite.len()
    );
    out.text("log.ndjson", &write_log(&header, &records))?;
    out.text("manifest.ndjson", &write_manifest(&world.manifest()))?;
    out.json("world.json", &world)?;
    out.table("suite.csv", &table)
}

fn column_pairs(table: &Table, x: &str, y: &str) -> Vec<(f64, f64)> {
    match (table.numbers(x), table.numbers(y)) {
        (Some(xs), Some(ys)) => xs.into_iter().zip(ys).filter_map(|(a, b)| Some((a?, b?))).collect(),
        _ => Vec::new(),
    }
}

fn grouped_pairs(table: &Table, key: &str, x: &str, y: &str) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let Some(k) = table.column(key) else { return groups };
    let (Some(xi), Some(yi)) = (table.column(x), table.column(y)) else { return groups };
    for row in &table.rows {
        let name = match &row[k] {
            Cell::Text(s) => s.clone(),
            Cell::Num(v) => v.to_string(),
            _ => continue,
        };
        if let (Cell::Num(a), Cell::Num(b)) = (&row[xi], &row[yi]) {
            groups.entry(name).or_default().push((*a, *b));
        }
    }
    groups
}

fn cmd_report(input: &Path, out: &Output) -> anyhow::Result<()> {
    let mut written = 0;
    let predictions = input.join("predictions.csv");
    if predictions.exists() {
        let table = Table::read(&predictions)?;
        let groups = grouped_pairs(&table, "set", "premem_avg", "test_accuracy");
        let all: Vec<f64> = groups.values().flatten().flat_map(|&(a, b)| [a, b]).chain([0.0, 1.0]).collect();
        let mut fig = Figure::new(
            "Test accuracy vs. pre-memorization train accuracy",
            Axis::fitted("average pre-memorization train accuracy", all.iter().copied()),
            Axis::fitted("test accuracy", all.iter().copied()),
        )
        .with_identity_line();
        for (set, pts) in groups {
            fig = fig.with_series(set, pts, Style::Markers);
        }
        let calibration = input.join("calibration.json");
        let summary = input.join("prediction_summary.json");
        if calibration.exists() {
            let file: CalibrationFile = serde_json::from_slice(&read(&calibration)?)?;
            fig = fig.annotate(format!("R² = {} at p = {}", out.num(file.selected_r2), out.num(file.selected_p)));
            if let Some(h) = file.heldout_r2 {
                fig = fig.annotate(format!("heldout R² = {}", out.num(h)));
            }
        } else if summary.exists() {
            let s: PredictionSummary = serde_json::from_slice(&read(&summary)?)?;
            if let Some(r2) = s.r2_identity {
                fig = fig.annotate(format!("R² = {} at p = {}", out.num(r2), out.num(s.p)));
            }
        }
        out.text("scatter.svg", &fig.render())?;
        written += 1;
    }

    let curve = input.join("calibration_curve.csv");
    if curve.exists() {
        let table = Table::read(&curve)?;
        let cal = column_pairs(&table, "p", "r2_identity");
        let held = column_pairs(&table, "p", "heldout_r2_identity");
        let xs = cal.iter().map(|pt| pt.0);
        let ys = cal.iter().chain(&held).map(|pt| pt.1);
        let mut fig = Figure::new("Calibration curve", Axis::fitted("threshold p", xs), Axis::fitted("R²", ys))
            .with_series("calibration", cal, Style::Line);
        if !held.is_empty() {
            fig = fig.with_series("heldout", held, Style::Line);
        }
        out.text("calibration_curve.svg", &fig.render())?;
        written += 1;
    }

    let ledger = input.join("curation_ledger.csv");
    if ledger.exists() {
        let table = Table::read(&ledger)?;
        let groups = grouped_pairs(&table, "strategy", "cumulative_new_examples", "test_accuracy");
        let xs: Vec<f64> = groups.values().flatten().map(|pt| pt.0).collect();
        let ys: Vec<f64> = groups.values().flatten().map(|pt| pt.1).collect();
        let mut fig = Figure::new("Learning curves", Axis::fitted("new examples", xs), Axis::fitted("test accuracy", ys));
        for (name, pts) in groups {
            fig = fig.with_series(name, pts, Style::Line);
        }
        out.text("learning_curve.svg", &fig.render())?;
        written += 1;
    }

    let robustness = input.join("robustness_bins.csv");
    if robustness.exists() {
        let table = Table::read(&robustness)?;
        let groups = grouped_pairs(&table, "variant", "premem_lo", "mean_accuracy");
        let hi = grouped_pairs(&table, "variant", "premem_lo", "premem_hi");
        let mut fig = Figure::new(
            "Accuracy under perturbation by pre-memorization bin",
            Axis::unit("pre-memorization train accuracy"),
            Axis::unit("mean accuracy"),
        );
        for (variant, pts) in groups {
            let edges: BTreeMap<u64, f64> =
                hi.get(&variant).into_iter().flatten().map(|&(lo, hi)| (lo.to_bits(), hi)).collect();
            let mids = pts.iter().map(|&(lo, y)| ((lo + edges.get(&lo.to_bits()).copied().unwrap_or(lo)) / 2.0, y));
            fig = fig.with_series(variant, mids.collect(), Style::Line);
        }
        out.text("robustness.svg", &fig.render())?;
        written += 1;
    }

    if written == 0 {
        bail!("no report inputs (predictions, calibration curve, curation ledger, robustness bins) in {}", input.display());
    }
    say!("{written} figure(s) written");
    Ok(())
}

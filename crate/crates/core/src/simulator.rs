//! Synthetic learning dynamics with planted ground truth.
//!
//! Every example has a pre-memorization accuracy ceiling (`plateau_a`), an
//! epoch at which its target-trace perplexity falls to the planted threshold
//! (`mem_epoch`), a rise rate, and a perturbation retention factor
//! (`fragility`). Per checkpoint:
//!
//! * accuracy rises as `plateau_a * (1 - exp(-rise_rate * epoch))` until
//!   `mem_epoch`, then ramps towards 1; values are quantized to
//!   `k / samples_per_eval` so they serialize exactly as sample counts;
//! * perplexity decays from `start_factor * p*` towards 1 as a power law,
//!   equal to `p*` exactly at `mem_epoch` and strictly above it before;
//! * test accuracy is the mean planted pre-memorization accuracy over the
//!   original examples plus Gaussian noise, clamped to [0, 1].
//!
//! The planted pre-memorization accuracy is computed from the parameters in
//! closed form (the quantized accuracy of the last checkpoint before
//! `mem_epoch`), independently of [`crate::trajectory`].

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::calibration::{Checkpoint, RunObservation};
use crate::curation::{CurationPlan, ScoreKind, ScoreMap, TrainedRun, Trainer};
use crate::error::{Error, Result};
use crate::io::ManifestRow;
use crate::rng;
use crate::trajectory::{EvalRecord, ExampleId, ExampleTrajectory, Split, TrajectoryPoint, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticExampleParams {
    pub example_id: ExampleId,
    pub plateau_a: f64,
    /// `f64::INFINITY` for examples that are never memorized.
    #[serde(with = "infinite_as_null")]
    pub mem_epoch: f64,
    pub rise_rate: f64,
    pub fragility: f64,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() { None } else { Some(*v) }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Sampling ranges for [`SyntheticWorld::generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub n_examples: usize,
    pub planted_p_star: f64,
    pub noise_sigma: f64,
    pub epochs: Vec<f64>,
    pub samples_per_eval: u32,
    pub n_test_examples: usize,
    pub plateau_range: (f64, f64),
    /// Plateaus are `lo + (hi - lo) * u^(1 / plateau_skew)` for uniform `u`,
    /// a Beta(plateau_skew, 1) shape. 1 is uniform; larger values put more
    /// examples near `hi`.
    #[serde(default = "unit_skew")]
    pub plateau_skew: f64,
    /// Log-uniform range of finite memorization epochs.
    pub mem_epoch_range: (f64, f64),
    pub never_memorized_fraction: f64,
    /// Log-uniform range of rise rates.
    pub rise_rate_range: (f64, f64),
    /// Retention of a plateau-0 example under perturbation; retention grows
    /// linearly to 1 at plateau 1.
    pub fragility_floor: f64,
    pub dynamics: Dynamics,
}

fn unit_skew() -> f64 {
    1.0
}

impl WorldConfig {
    /// A mostly solved dataset whose examples memorize late: the setting the
    /// closed-loop curation experiments run in.
    pub fn curation() -> Self {
        WorldConfig { plateau_skew: 2.0, mem_epoch_range: (3.0, 24.0), ..WorldConfig::default() }
    }
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            n_examples: 1000,
            planted_p_star: 2.0,
            noise_sigma: 0.01,
            epochs: (1..=12).map(|i| f64::from(i) * 0.5).collect(),
            samples_per_eval: 16,
            n_test_examples: 200,
            plateau_range: (0.0, 1.0),
            plateau_skew: 1.0,
            mem_epoch_range: (0.5, 8.0),
            never_memorized_fraction: 0.1,
            rise_rate_range: (0.3, 3.0),
            fragility_floor: 0.1,
            dynamics: Dynamics::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dynamics {
    /// Initial perplexity as a multiple of `p*`.
    pub perplexity_start_factor: f64,
    /// Rate at which accuracy ramps to 1 after memorization.
    pub post_memorization_rate: f64,
    /// Plateau gain a source example receives per collected copy.
    pub transfer_coefficient: f64,
    pub perturbation_tags: Vec<String>,
}

impl Default for Dynamics {
    fn default() -> Self {
        Dynamics {
            perplexity_start_factor: 4.0,
            post_memorization_rate: 2.0,
            transfer_coefficient: 0.3,
            perturbation_tags: vec!["first".into(), "we-know-that".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub params: Vec<SyntheticExampleParams>,
    pub planted_p_star: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub epochs: Vec<f64>,
    pub samples_per_eval: u32,
    pub n_test_examples: usize,
    pub dynamics: Dynamics,
}

/// Run-level multipliers, the simulator's analogue of changing the learning
/// rate between runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunVariation {
    pub rise_rate_multiplier: f64,
    pub mem_epoch_multiplier: f64,
}

impl RunVariation {
    pub const IDENTITY: RunVariation = RunVariation { rise_rate_multiplier: 1.0, mem_epoch_multiplier: 1.0 };
}

/// Log-uniform ranges run multipliers are drawn from in [`generate_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteVariation {
    pub rise_rate: (f64, f64),
    pub mem_epoch: (f64, f64),
}

impl Default for SuiteVariation {
    fn default() -> Self {
        SuiteVariation { rise_rate: (0.5, 2.0), mem_epoch: (0.3, 3.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRun {
    pub run_id: String,
    pub epochs: Vec<f64>,
    pub variation: RunVariation,
    pub trajectories: Vec<ExampleTrajectory>,
    /// Planted test accuracy per epoch, noise included.
    pub test_accuracy: Vec<f64>,
    /// Correct-sample counts per test example per epoch.
    pub test_outcomes: Vec<(ExampleId, Vec<u32>)>,
    pub samples_per_eval: u32,
}

impl SimulatedRun {
    pub fn observation(&self) -> RunObservation {
        RunObservation {
            run_id: self.run_id.clone(),
            trajectories: self.trajectories.clone(),
            checkpoints: self
                .epochs
                .iter()
                .zip(&self.test_accuracy)
                .map(|(&epoch, &test_accuracy)| Checkpoint { epoch, test_accuracy })
                .collect(),
        }
    }

    /// Train-split original records followed by test-split records, in the
    /// log schema.
    pub fn to_records(&self) -> Vec<EvalRecord> {
        let n = self.samples_per_eval;
        let mut out = Vec::new();
        for traj in &self.trajectories {
            for pt in traj.points() {
                let k = (pt.accuracy * f64::from(n)).round() as u32;
                out.push(EvalRecord {
                    run_id: self.run_id.clone(),
                    epoch: pt.epoch,
                    example_id: traj.example_id().clone(),
                    split: Split::Train,
                    variant: Variant::Original,
                    n_samples: n,
                    n_correct: k,
                    target_perplexity: Some(pt.perplexity),
                    greedy_loglik: Some(greedy_loglik(k, n)),
                });
            }
        }
        for (id, counts) in &self.test_outcomes {
            for (&epoch, &k) in self.epochs.iter().zip(counts) {
                out.push(EvalRecord {
                    run_id: self.run_id.clone(),
                    epoch,
                    example_id: id.clone(),
                    split: Split::Test,
                    variant: Variant::Original,
                    n_samples: n,
                    n_correct: k,
                    target_perplexity: None,
                    greedy_loglik: Some(greedy_loglik(k, n)),
                });
            }
        }
        out
    }
}

/// Planted confidence score: a smoothed log of the sampled accuracy.
fn greedy_loglik(k: u32, n: u32) -> f64 {
    ((f64::from(k) + 0.5) / (f64::from(n) + 1.0)).ln()
}

fn log_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn example_id(i: usize) -> ExampleId {
    ExampleId::new(format!("ex{i:05}")).expect("non-empty")
}

fn test_example_id(i: usize) -> ExampleId {
    ExampleId::new(format!("test{i:05}")).expect("non-empty")
}

impl SyntheticWorld {
    pub fn generate(config: &WorldConfig, seed: u64) -> Result<Self> {
        let check_range = |what: &'static str, (lo, hi): (f64, f64), min: f64| {
            if lo.is_finite() && hi.is_finite() && lo >= min && lo <= hi {
                Ok(())
            } else {
                Err(Error::invalid(what, format!("range ({lo}, {hi})")))
            }
        };
        check_range("plateau range", config.plateau_range, 0.0)?;
        if config.plateau_range.1 > 1.0 {
            return Err(Error::invalid("plateau range", "upper bound above 1"));
        }
        check_range("mem epoch range", config.mem_epoch_range, f64::MIN_POSITIVE)?;
        check_range("rise rate range", config.rise_rate_range, f64::MIN_POSITIVE)?;
        if !(config.plateau_skew.is_finite() && config.plateau_skew > 0.0) {
            return Err(Error::invalid("plateau skew", config.plateau_skew.to_string()));
        }
        if !(0.0..=1.0).contains(&config.never_memorized_fraction) {
            return Err(Error::invalid("never-memorized fraction", config.never_memorized_fraction.to_string()));
        }
        if !(0.0..=1.0).contains(&config.fragility_floor) {
            return Err(Error::invalid("fragility floor", config.fragility_floor.to_string()));
        }

        let params = (0..config.n_examples)
            .map(|i| {
                let id = example_id(i);
                let mut r = rng::stream(seed, &["example", id.as_str()]);
                let (lo, hi) = config.plateau_range;
                let plateau_a = lo + r.random::<f64>().powf(config.plateau_skew.recip()) * (hi - lo);
                let never = r.random::<f64>() < config.never_memorized_fraction;
                let mem = log_uniform(&mut r, config.mem_epoch_range);
                let rise_rate = log_uniform(&mut r, config.rise_rate_range);
                SyntheticExampleParams {
                    example_id: id,
                    plateau_a,
                    mem_epoch: if never { f64::INFINITY } else { mem },
                    rise_rate,
                    fragility: config.fragility_floor + (1.0 - config.fragility_floor) * plateau_a,
                }
            })
            .collect();

        SyntheticWorld::new(
            params,
            config.planted_p_star,
            config.noise_sigma,
            seed,
            config.epochs.clone(),
            config.samples_per_eval,
            config.n_test_examples,
            config.dynamics.clone(),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: Vec<SyntheticExampleParams>,
        planted_p_star: f64,
        noise_sigma: f64,
        seed: u64,
        epochs: Vec<f64>,
        samples_per_eval: u32,
        n_test_examples: usize,
        dynamics: Dynamics,
    ) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::EmptyCollection("synthetic examples"));
        }
        if !(planted_p_star > 1.0 && planted_p_star.is_finite()) {
            return Err(Error::invalid("planted threshold", format!("{planted_p_star} (must be > 1)")));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::invalid("noise sigma", noise_sigma.to_string()));
        }
        if epochs.is_empty() || epochs.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::invalid("epochs", "need a non-empty list of finite epochs >= 0"));
        }
        if epochs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("epochs", "must be strictly increasing"));
        }
        if samples_per_eval == 0 {
            return Err(Error::NoSamples);
        }
        if !(dynamics.perplexity_start_factor > 1.0) || !(dynamics.post_memorization_rate > 0.0) {
            return Err(Error::invalid("dynamics", "start factor must exceed 1 and ramp rate be positive"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &params {
            if !seen.insert(&p.example_id) {
                return Err(Error::Duplicate { what: "example id", key: p.example_id.to_string() });
            }
            let ok = (0.0..=1.0).contains(&p.plateau_a)
                && p.mem_epoch > 0.0
                && !p.mem_epoch.is_nan()
                && p.rise_rate > 0.0
                && p.rise_rate.is_finite()
                && (0.0..=1.0).contains(&p.fragility);
            if !ok {
                return Err(Error::invalid("example parameters", format!("{:?}", p)));
            }
        }
        let mut params = params;
        params.sort_by(|a, b| a.example_id.cmp(&b.example_id));
        Ok(SyntheticWorld {
            params,
            planted_p_star,
            noise_sigma,
            seed,
            epochs,
            samples_per_eval,
            n_test_examples,
            dynamics,
        })
    }

    fn params_of(&self, id: &ExampleId) -> Result<&SyntheticExampleParams> {
        self.params
            .binary_search_by(|p| p.example_id.cmp(id))
            .map(|i| &self.params[i])
            .map_err(|_| Error::UnknownExample(id.to_string()))
    }

    fn raw_accuracy(&self, p: &SyntheticExampleParams, v: RunVariation, epoch: f64) -> f64 {
        let rise = p.rise_rate * v.rise_rate_multiplier;
        let mem = p.mem_epoch * v.mem_epoch_multiplier;
        let rising = |e: f64| p.plateau_a * (1.0 - (-rise * e).exp());
        if epoch < mem {
            rising(epoch)
        } else {
            let at_mem = rising(mem);
            let ramp = 1.0 - (-self.dynamics.post_memorization_rate * (epoch - mem)).exp();
            at_mem + (1.0 - at_mem) * ramp
        }
    }

    /// Correct-sample count of the quantized accuracy.
    fn correct_count(&self, p: &SyntheticExampleParams, v: RunVariation, epoch: f64) -> u32 {
        let n = f64::from(self.samples_per_eval);
        ((self.raw_accuracy(p, v, epoch) * n).round() as u32).min(self.samples_per_eval)
    }

    fn quantized_accuracy(&self, p: &SyntheticExampleParams, v: RunVariation, epoch: f64) -> f64 {
        f64::from(self.correct_count(p, v, epoch)) / f64::from(self.samples_per_eval)
    }

    fn perplexity_at(&self, p: &SyntheticExampleParams, v: RunVariation, epoch: f64) -> f64 {
        let p_star = self.planted_p_star;
        let start = self.dynamics.perplexity_start_factor * p_star;
        let mem = p.mem_epoch * v.mem_epoch_multiplier;
        if mem.is_infinite() {
            return p_star + (start - p_star) / (1.0 + epoch).powi(2);
        }
        if epoch == mem {
            return p_star;
        }
        // 1 + (start - 1) / (1 + e/tau)^2 passes through p* at e = mem
        let tau = mem / (((start - 1.0) / (p_star - 1.0)).sqrt() - 1.0);
        let perp = 1.0 + (start - 1.0) / (1.0 + epoch / tau).powi(2);
        if epoch < mem {
            perp.max(p_star.next_up())
        } else {
            perp.min(p_star.next_down()).max(1.0)
        }
    }

    /// Planted pre-memorization accuracy at `epochs[upto]`: quantized accuracy
    /// of the last checkpoint before memorization, or 0 if there is none.
    pub fn planted_premem(&self, p: &SyntheticExampleParams, v: RunVariation, upto: usize) -> f64 {
        let mem = p.mem_epoch * v.mem_epoch_multiplier;
        self.epochs[..=upto]
            .iter()
            .rposition(|&e| e < mem)
            .map_or(0.0, |i| self.quantized_accuracy(p, v, self.epochs[i]))
    }

    /// Noise-free planted test accuracy per epoch.
    pub fn planted_test_accuracy(&self, v: RunVariation) -> Vec<f64> {
        self.planted_test_accuracy_over(&self.params, v)
    }

    fn planted_test_accuracy_over(&self, params: &[SyntheticExampleParams], v: RunVariation) -> Vec<f64> {
        (0..self.epochs.len())
            .map(|j| {
                let total: f64 = params.iter().map(|p| self.planted_premem(p, v, j)).sum();
                total / params.len() as f64
            })
            .collect()
    }

    pub fn trajectory(&self, p: &SyntheticExampleParams, v: RunVariation) -> ExampleTrajectory {
        let points = self
            .epochs
            .iter()
            .map(|&epoch| TrajectoryPoint {
                epoch,
                accuracy: self.quantized_accuracy(p, v, epoch),
                perplexity: self.perplexity_at(p, v, epoch),
            })
            .collect();
        ExampleTrajectory::new(p.example_id.clone(), points).expect("simulator trajectories are valid")
    }

    pub fn generate_run(&self) -> SimulatedRun {
        self.generate_run_with("base", RunVariation::IDENTITY)
    }

    pub fn generate_run_with(&self, run_id: &str, variation: RunVariation) -> SimulatedRun {
        self.simulate(run_id, variation, &self.params)
    }

    fn simulate(&self, run_id: &str, variation: RunVariation, params: &[SyntheticExampleParams]) -> SimulatedRun {
        let trajectories = params.iter().map(|p| self.trajectory(p, variation)).collect();
        let mut noise_rng = rng::stream(self.seed, &["test-noise", run_id]);
        let noise = Normal::new(0.0, self.noise_sigma).expect("sigma validated");
        let test_accuracy: Vec<f64> = self
            .planted_test_accuracy_over(params, variation)
            .into_iter()
            .map(|acc| {
                let eps = if self.noise_sigma > 0.0 { noise.sample(&mut noise_rng) } else { 0.0 };
                (acc + eps).clamp(0.0, 1.0)
            })
            .collect();
        let test_outcomes = (0..self.n_test_examples)
            .map(|i| {
                let id = test_example_id(i);
                let mut r = rng::stream(self.seed, &["test-example", run_id, id.as_str()]);
                let counts = test_accuracy
                    .iter()
                    .map(|&q| {
                        Binomial::new(u64::from(self.samples_per_eval), q)
                            .expect("q in [0, 1]")
                            .sample(&mut r) as u32
                    })
                    .collect();
                (id, counts)
            })
            .collect();
        SimulatedRun {
            run_id: run_id.to_string(),
            epochs: self.epochs.clone(),
            variation,
            trajectories,
            test_accuracy,
            test_outcomes,
            samples_per_eval: self.samples_per_eval,
        }
    }

    /// End-of-training accuracy under `variant`: unchanged for the original
    /// prompt, scaled by the example's fragility under a perturbation.
    pub fn perturbed_eval(&self, example_id: &ExampleId, variant: &Variant) -> Result<f64> {
        let p = self.params_of(example_id)?;
        let final_epoch = self.epochs[self.epochs.len() - 1];
        let end = self.quantized_accuracy(p, RunVariation::IDENTITY, final_epoch);
        match variant {
            Variant::Original => Ok(end),
            Variant::Perturbed(tag) if self.dynamics.perturbation_tags.iter().any(|t| t == tag) => {
                Ok(end * p.fragility)
            }
            Variant::Perturbed(tag) => Err(Error::UnknownVariant(tag.clone())),
        }
    }

    /// Final-checkpoint records for the original prompt and every
    /// perturbation tag, as an external sampler would return them.
    pub fn perturbation_records(&self, run_id: &str) -> Vec<EvalRecord> {
        let n = self.samples_per_eval;
        let epoch = self.epochs[self.epochs.len() - 1];
        let variants: Vec<Variant> = std::iter::once(Variant::Original)
            .chain(self.dynamics.perturbation_tags.iter().map(|t| Variant::Perturbed(t.clone())))
            .collect();
        let mut out = Vec::new();
        for p in &self.params {
            for variant in &variants {
                let acc = self.perturbed_eval(&p.example_id, variant).expect("known id and tag");
                out.push(EvalRecord {
                    run_id: run_id.to_string(),
                    epoch,
                    example_id: p.example_id.clone(),
                    split: Split::Train,
                    variant: variant.clone(),
                    n_samples: n,
                    n_correct: ((acc * f64::from(n)).round() as u32).min(n),
                    target_perplexity: None,
                    greedy_loglik: None,
                });
            }
        }
        out
    }

    /// Planted solution length: more lines for harder (low-plateau) examples,
    /// with noise.
    pub fn planted_solution_lines(&self, p: &SyntheticExampleParams) -> u32 {
        let mut r = rng::stream(self.seed, &["solution-lines", p.example_id.as_str()]);
        let noise = Normal::new(0.0, 1.5).expect("valid").sample(&mut r);
        (2.0 + 8.0 * (1.0 - p.plateau_a) + noise).round().max(1.0) as u32
    }

    /// Planted IFD score (label-given-input over label-only perplexity):
    /// higher for harder examples, with noise.
    pub fn planted_ifd(&self, p: &SyntheticExampleParams) -> f64 {
        let mut r = rng::stream(self.seed, &["ifd", p.example_id.as_str()]);
        let label_only = 2.0 + 4.0 * r.random::<f64>();
        let noise = Normal::new(0.0, 0.15).expect("valid").sample(&mut r);
        let ratio = (0.4 + 0.8 * (1.0 - p.plateau_a) + noise).max(0.05);
        let given_input = (ratio * label_only).max(1.0);
        given_input / label_only
    }

    /// Dataset manifest for the world's examples; solution traces carry the
    /// planted line counts.
    pub fn manifest(&self) -> Vec<ManifestRow> {
        self.params
            .iter()
            .map(|p| {
                let lines = self.planted_solution_lines(p);
                let mut solution: Vec<String> = (1..lines).map(|i| format!("step {i}")).collect();
                solution.push("#### answer".into());
                ManifestRow {
                    example_id: p.example_id.clone(),
                    query: format!("synthetic question {}", p.example_id),
                    target_solution: solution.join("\n"),
                    n_solution_lines: Some(lines),
                    level: None,
                }
            })
            .collect()
    }
}

/// Runs sharing the world's examples and threshold, each with its own
/// log-uniformly drawn rise-rate and memorization-epoch multipliers.
pub fn generate_suite(world: &SyntheticWorld, n_runs: usize, variation: &SuiteVariation) -> Vec<SimulatedRun> {
    (0..n_runs)
        .map(|i| {
            let run_id = format!("run{i:02}");
            let mut r = rng::stream(world.seed, &["suite", &run_id]);
            let v = RunVariation {
                rise_rate_multiplier: log_uniform(&mut r, variation.rise_rate),
                mem_epoch_multiplier: log_uniform(&mut r, variation.mem_epoch),
            };
            world.generate_run_with(&run_id, v)
        })
        .collect()
}

#[derive(Debug, Clone)]
struct DatasetEntry {
    id: ExampleId,
    /// Index of the original example this entry was derived from.
    root: usize,
}

/// In-process trainer over a synthetic world. Collected examples copy their
/// source; each copy raises the source's plateau by the transfer
/// coefficient (clamped to 1) for every later training. Test accuracy is
/// measured over the original examples. Every training starts from scratch.
#[derive(Debug, Clone)]
pub struct SimulatedTrainer {
    world: SyntheticWorld,
    plateaus: Vec<f64>,
    dataset: Vec<DatasetEntry>,
    ifd: Vec<f64>,
    heuristic: Vec<f64>,
    trainings: usize,
    collected: usize,
}

impl SimulatedTrainer {
    pub fn new(world: SyntheticWorld) -> Self {
        let plateaus = world.params.iter().map(|p| p.plateau_a).collect();
        let dataset = world
            .params
            .iter()
            .enumerate()
            .map(|(root, p)| DatasetEntry { id: p.example_id.clone(), root })
            .collect();
        let ifd = world.params.iter().map(|p| world.planted_ifd(p)).collect();
        let heuristic = world.params.iter().map(|p| f64::from(world.planted_solution_lines(p))).collect();
        SimulatedTrainer { world, plateaus, dataset, ifd, heuristic, trainings: 0, collected: 0 }
    }

    pub fn world(&self) -> &SyntheticWorld {
        &self.world
    }

    pub fn current_plateaus(&self) -> BTreeMap<ExampleId, f64> {
        self.world.params.iter().zip(&self.plateaus).map(|(p, &a)| (p.example_id.clone(), a)).collect()
    }

    pub fn dataset_size(&self) -> usize {
        self.dataset.len()
    }

    fn current_params(&self) -> Vec<SyntheticExampleParams> {
        self.world
            .params
            .iter()
            .zip(&self.plateaus)
            .map(|(p, &a)| SyntheticExampleParams { plateau_a: a, ..p.clone() })
            .collect()
    }
}

impl Trainer for SimulatedTrainer {
    fn train(&mut self) -> Result<TrainedRun> {
        let run_id = format!("train{:02}", self.trainings);
        self.trainings += 1;
        let params = self.current_params();
        let run = self.world.simulate(&run_id, RunVariation::IDENTITY, &params);
        let final_test = run.test_accuracy[run.test_accuracy.len() - 1];
        let mut trajectories = run.trajectories;
        for entry in &self.dataset[self.world.params.len()..] {
            let root = &trajectories[entry.root];
            let copy = ExampleTrajectory::new(entry.id.clone(), root.points().to_vec())?;
            trajectories.push(copy);
        }
        Ok(TrainedRun { run_id, trajectories, test_accuracy: final_test })
    }

    fn difficulty_scores(&mut self, kind: ScoreKind) -> Result<ScoreMap> {
        let table = match kind {
            ScoreKind::Ifd => &self.ifd,
            ScoreKind::Heuristic => &self.heuristic,
            ScoreKind::Premem => {
                return Err(Error::invalid("difficulty scores", "pre-memorization accuracy comes from training"))
            }
        };
        Ok(self.dataset.iter().map(|e| (e.id.clone(), table[e.root])).collect())
    }

    fn generate(&mut self, plan: &CurationPlan, count: usize) -> Result<Vec<ExampleId>> {
        let index: BTreeMap<&ExampleId, usize> =
            self.dataset.iter().map(|e| (&e.id, e.root)).collect();
        let roots = plan
            .selected_example_ids
            .iter()
            .map(|id| index.get(id).copied().ok_or_else(|| Error::UnknownExample(id.to_string())))
            .collect::<Result<Vec<usize>>>()?;
        if count == 0 {
            return Ok(Vec::new());
        }
        let picker = WeightedIndex::new(&plan.weights)
            .map_err(|e| Error::invalid("plan weights", e.to_string()))?;
        let mut r = rng::stream(self.world.seed, &["generate", &plan.plan_id]);
        let transfer = self.world.dynamics.transfer_coefficient;
        let mut new_ids = Vec::with_capacity(count);
        for _ in 0..count {
            let root = roots[picker.sample(&mut r)];
            self.collected += 1;
            let id = ExampleId::new(format!("new{:06}", self.collected))?;
            self.plateaus[root] = (self.plateaus[root] + transfer).min(1.0);
            self.dataset.push(DatasetEntry { id: id.clone(), root });
            new_ids.push(id);
        }
        Ok(new_ids)
    }
}

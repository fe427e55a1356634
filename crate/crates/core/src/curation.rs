//! Iterative data collection driven by pre-memorization accuracy, together
//! with the comparison strategies (i.i.d., IFD percentile, heuristic
//! percentile).
//!
//! Each iteration trains on the current dataset, scores every example, turns
//! the scores into a sampling distribution over existing examples (a plan),
//! and collects that iteration's batch of new examples from the plan.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{pre_memorization_accuracy, ExampleId, ExampleTrajectory, MemorizationThreshold};

pub type ScoreMap = BTreeMap<ExampleId, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    PremBelowThreshold,
    Iid,
    /// Keep the top `percentile` percent of examples by IFD score.
    IfdTopPercentile { percentile: f64 },
    /// Keep the top `percentile` percent by heuristic difficulty.
    HeuristicTopPercentile { percentile: f64 },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::PremBelowThreshold => "premem_below_t",
            Strategy::Iid => "iid",
            Strategy::IfdTopPercentile { .. } => "ifd_top_percentile",
            Strategy::HeuristicTopPercentile { .. } => "heuristic_top_percentile",
        }
    }

    /// Which per-example scores the strategy consumes.
    pub fn score_kind(&self) -> Option<ScoreKind> {
        match self {
            Strategy::PremBelowThreshold => Some(ScoreKind::Premem),
            Strategy::Iid => None,
            Strategy::IfdTopPercentile { .. } => Some(ScoreKind::Ifd),
            Strategy::HeuristicTopPercentile { .. } => Some(ScoreKind::Heuristic),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Premem,
    Ifd,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationConfig {
    pub threshold_t: f64,
    pub iterations_n: usize,
    pub batch_sizes: Vec<usize>,
    pub strategy: Strategy,
}

impl CurationConfig {
    /// `iterations` equal batches splitting `total` new examples, remainder
    /// going to the earliest iterations.
    pub fn even_batches(strategy: Strategy, threshold_t: f64, iterations: usize, total: usize) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::invalid("iteration count", "must be at least 1"));
        }
        let base = total / iterations;
        let extra = total % iterations;
        let batch_sizes = (0..iterations).map(|i| base + usize::from(i < extra)).collect();
        let config = CurationConfig { threshold_t, iterations_n: iterations, batch_sizes, strategy };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold_t) {
            return Err(Error::invalid("curation threshold", format!("{} not in [0, 1]", self.threshold_t)));
        }
        if self.iterations_n < 1 {
            return Err(Error::invalid("iteration count", "must be at least 1"));
        }
        if self.batch_sizes.len() != self.iterations_n {
            return Err(Error::LengthMismatch { expected: self.iterations_n, found: self.batch_sizes.len() });
        }
        match self.strategy {
            Strategy::IfdTopPercentile { percentile } | Strategy::HeuristicTopPercentile { percentile }
                if !(percentile > 0.0 && percentile < 100.0) =>
            {
                Err(Error::invalid("percentile", format!("{percentile} not in (0, 100)")))
            }
            _ => Ok(()),
        }
    }

    pub fn total_budget(&self) -> usize {
        self.batch_sizes.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub strategy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percentile: Option<f64>,
    pub source_run_id: String,
}

/// Empirical distribution over existing examples that new data should be
/// collected from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationPlan {
    pub plan_id: String,
    pub iteration_index: usize,
    pub selected_example_ids: Vec<ExampleId>,
    pub weights: Vec<f64>,
    pub requested_count: usize,
    pub provenance: Provenance,
}

impl CurationPlan {
    pub fn weight_of(&self, id: &ExampleId) -> Option<f64> {
        self.selected_example_ids.iter().position(|x| x == id).map(|i| self.weights[i])
    }
}

/// Ids whose pre-memorization accuracy is strictly below `t`, in id order.
pub fn select_below_threshold(premem: &ScoreMap, t: f64) -> Result<Vec<ExampleId>> {
    if premem.is_empty() {
        return Err(Error::EmptyCollection("pre-memorization accuracies"));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid("curation threshold", format!("{t} not in [0, 1]")));
    }
    let selected: Vec<ExampleId> = premem.iter().filter(|(_, &v)| v < t).map(|(id, _)| id.clone()).collect();
    if selected.is_empty() {
        let min_observed = premem.values().copied().fold(f64::INFINITY, f64::min);
        return Err(Error::NoneBelowThreshold { threshold: t, min_observed });
    }
    Ok(selected)
}

/// The `ceil(top_fraction * N)` highest-scoring ids; ties at the cutoff go to
/// the smaller example id. Returned in id order.
pub fn percentile_select(scores: &ScoreMap, top_fraction: f64) -> Result<Vec<ExampleId>> {
    if scores.is_empty() {
        return Err(Error::EmptyCollection("scores"));
    }
    if !(top_fraction > 0.0 && top_fraction < 1.0) {
        return Err(Error::invalid("top fraction", format!("{top_fraction} not in (0, 1)")));
    }
    if let Some((id, v)) = scores.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::invalid("score", format!("{v} for {id}")));
    }
    // the epsilon keeps e.g. 0.7 * 10 = 7.000000000000001 at 7
    let count = ((top_fraction * scores.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut ranked: Vec<(&ExampleId, f64)> = scores.iter().map(|(id, &v)| (id, v)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut chosen: Vec<ExampleId> = ranked.into_iter().take(count).map(|(id, _)| id.clone()).collect();
    chosen.sort();
    Ok(chosen)
}

pub fn plan_id(source_run_id: &str, iteration: usize, strategy: &Strategy) -> String {
    format!("{source_run_id}.iter{iteration}.{}", strategy.name())
}

/// Builds the plan for `iteration` (1-based). `dataset_ids` is the current
/// dataset; `scores` holds the strategy's metric and may be empty for iid.
pub fn make_plan(
    config: &CurationConfig,
    iteration: usize,
    source_run_id: &str,
    dataset_ids: &[ExampleId],
    scores: &ScoreMap,
) -> Result<CurationPlan> {
    config.validate()?;
    if iteration < 1 || iteration > config.iterations_n {
        return Err(Error::invalid(
            "iteration",
            format!("{iteration} not in [1, {}]", config.iterations_n),
        ));
    }
    let dataset: BTreeSet<&ExampleId> = dataset_ids.iter().collect();
    if let Some(unknown) = scores.keys().find(|id| !dataset.contains(id)) {
        return Err(Error::UnknownExample(unknown.to_string()));
    }

    let (selected, threshold, percentile) = match config.strategy {
        Strategy::PremBelowThreshold => {
            (select_below_threshold(scores, config.threshold_t)?, Some(config.threshold_t), None)
        }
        Strategy::Iid => {
            if dataset.is_empty() {
                return Err(Error::EmptyCollection("dataset"));
            }
            (dataset.into_iter().cloned().collect(), None, None)
        }
        Strategy::IfdTopPercentile { percentile } | Strategy::HeuristicTopPercentile { percentile } => {
            (percentile_select(scores, percentile / 100.0)?, None, Some(percentile))
        }
    };

    let weight = 1.0 / selected.len() as f64;
    Ok(CurationPlan {
        plan_id: plan_id(source_run_id, iteration, &config.strategy),
        iteration_index: iteration,
        weights: vec![weight; selected.len()],
        selected_example_ids: selected,
        requested_count: config.batch_sizes[iteration - 1],
        provenance: Provenance {
            strategy: config.strategy.name().to_string(),
            threshold,
            percentile,
            source_run_id: source_run_id.to_string(),
        },
    })
}

/// Result of training on the current dataset.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub run_id: String,
    pub trajectories: Vec<ExampleTrajectory>,
    pub test_accuracy: f64,
}

/// A model trainer the collection loop can drive.
pub trait Trainer {
    /// Trains on the current dataset (original plus everything collected).
    fn train(&mut self) -> Result<TrainedRun>;

    /// Static difficulty scores over the current dataset.
    fn difficulty_scores(&mut self, kind: ScoreKind) -> Result<ScoreMap> {
        Err(Error::invalid("difficulty scores", format!("{kind:?} scores not supported by this trainer")))
    }

    /// Collects `count` new examples following `plan` and adds them to the
    /// dataset; returns the new ids.
    fn generate(&mut self, plan: &CurationPlan, count: usize) -> Result<Vec<ExampleId>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub plan: CurationPlan,
    pub ingested: Vec<ExampleId>,
    pub resulting_run_id: String,
    pub resulting_test_accuracy: f64,
    pub cumulative_new_examples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationLedger {
    pub initial_run_id: String,
    pub initial_test_accuracy: f64,
    pub entries: Vec<LedgerEntry>,
}

impl CurationLedger {
    /// (new examples collected so far, test accuracy) after each training.
    pub fn learning_curve(&self) -> Vec<(usize, f64)> {
        std::iter::once((0, self.initial_test_accuracy))
            .chain(self.entries.iter().map(|e| (e.cumulative_new_examples, e.resulting_test_accuracy)))
            .collect()
    }

    pub fn final_test_accuracy(&self) -> f64 {
        self.entries.last().map_or(self.initial_test_accuracy, |e| e.resulting_test_accuracy)
    }

    pub fn total_new_examples(&self) -> usize {
        self.entries.last().map_or(0, |e| e.cumulative_new_examples)
    }

    /// New examples needed to first reach `target`, interpolating linearly
    /// between consecutive trainings. `None` if the target is never reached.
    pub fn examples_to_reach(&self, target: f64) -> Option<f64> {
        let curve = self.learning_curve();
        if curve[0].1 >= target {
            return Some(0.0);
        }
        curve.windows(2).find_map(|w| {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if y1 < target {
                return None;
            }
            let frac = if y1 > y0 { (target - y0) / (y1 - y0) } else { 1.0 };
            Some(x0 as f64 + frac.clamp(0.0, 1.0) * (x1 as f64 - x0 as f64))
        })
    }
}

/// Pre-memorization accuracy of every example at its final checkpoint.
pub fn premem_scores(trajectories: &[ExampleTrajectory], p: MemorizationThreshold) -> Result<ScoreMap> {
    trajectories
        .iter()
        .map(|t| Ok((t.example_id().clone(), pre_memorization_accuracy(t, t.final_epoch(), p)?)))
        .collect()
}

pub fn run_loop<T: Trainer + ?Sized>(
    config: &CurationConfig,
    p: MemorizationThreshold,
    trainer: &mut T,
) -> Result<CurationLedger> {
    config.validate()?;
    let ctx = |iteration: usize| move |e: Error| Error::Trainer { iteration, source: Box::new(e) };

    let mut current = trainer.train().map_err(ctx(1))?;
    let initial_run_id = current.run_id.clone();
    let initial_test_accuracy = current.test_accuracy;
    let mut entries: Vec<LedgerEntry> = Vec::with_capacity(config.iterations_n);
    let mut cumulative = 0;

    for iteration in 1..=config.iterations_n {
        let dataset_ids: Vec<ExampleId> = current.trajectories.iter().map(|t| t.example_id().clone()).collect();
        let scores = match config.strategy.score_kind() {
            Some(ScoreKind::Premem) => premem_scores(&current.trajectories, p)?,
            Some(kind) => trainer.difficulty_scores(kind).map_err(ctx(iteration))?,
            None => ScoreMap::new(),
        };
        let plan = make_plan(config, iteration, &current.run_id, &dataset_ids, &scores)?;
        let count = plan.requested_count;
        let ingested = if count == 0 {
            Vec::new()
        } else {
            trainer.generate(&plan, count).map_err(ctx(iteration))?
        };
        if ingested.len() != count {
            return Err(Error::Trainer {
                iteration,
                source: Box::new(Error::LengthMismatch { expected: count, found: ingested.len() }),
            });
        }
        cumulative += count;
        current = trainer.train().map_err(ctx(iteration))?;
        log::debug!(
            "iteration {iteration}: {} -> {} new examples, test accuracy {:.4}",
            plan.plan_id,
            count,
            current.test_accuracy
        );
        entries.push(LedgerEntry {
            plan,
            ingested,
            resulting_run_id: current.run_id.clone(),
            resulting_test_accuracy: current.test_accuracy,
            cumulative_new_examples: cumulative,
        });
    }

    Ok(CurationLedger { initial_run_id, initial_test_accuracy, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> ExampleId {
        ExampleId::new(s).unwrap()
    }

    fn scores(pairs: &[(&str, f64)]) -> ScoreMap {
        pairs.iter().map(|(k, v)| (id(k), *v)).collect()
    }

    #[test]
    fn below_threshold_is_strict() {
        let m = scores(&[("e1", 0.2), ("e2", 0.8), ("e3", 0.5), ("e4", 1.0)]);
        assert_eq!(select_below_threshold(&m, 0.75).unwrap(), vec![id("e1"), id("e3")]);
        let err = select_below_threshold(&m, 0.0).unwrap_err();
        assert!(matches!(err, Error::NoneBelowThreshold { min_observed, .. } if min_observed == 0.2));
        let zeros = scores(&[("a", 0.0), ("b", 0.0)]);
        assert_eq!(select_below_threshold(&zeros, 0.1).unwrap().len(), 2);
    }

    #[test]
    fn percentile_values_and_ties() {
        let m = scores(&[("a", 3.0), ("b", 1.0), ("c", 4.0), ("d", 2.0)]);
        assert_eq!(percentile_select(&m, 0.5).unwrap(), vec![id("a"), id("c")]);
        let flat: ScoreMap = (0..8).map(|i| (id(&format!("e{i}")), 1.0)).collect();
        assert_eq!(percentile_select(&flat, 0.25).unwrap(), vec![id("e0"), id("e1")]);
        let ten: ScoreMap = (0..10).map(|i| (id(&format!("e{i}")), i as f64)).collect();
        assert_eq!(percentile_select(&ten, 0.7).unwrap().len(), 7);
        assert!(percentile_select(&ten, 1.0).is_err());
    }

    fn config(strategy: Strategy) -> CurationConfig {
        CurationConfig { threshold_t: 0.75, iterations_n: 5, batch_sizes: vec![20; 5], strategy }
    }

    #[test]
    fn premem_plan_uniform_over_selection() {
        let m = scores(&[("e1", 0.2), ("e2", 0.8), ("e3", 0.5)]);
        let ids: Vec<ExampleId> = m.keys().cloned().collect();
        let plan = make_plan(&config(Strategy::PremBelowThreshold), 1, "run0", &ids, &m).unwrap();
        assert_eq!(plan.selected_example_ids, vec![id("e1"), id("e3")]);
        assert_eq!(plan.weights, vec![0.5, 0.5]);
        assert_eq!(plan.provenance.threshold, Some(0.75));
        assert_eq!(plan.requested_count, 20);
    }

    #[test]
    fn iid_plan_covers_dataset() {
        let ids: Vec<ExampleId> = (0..100).map(|i| id(&format!("e{i:03}"))).collect();
        let plan = make_plan(&config(Strategy::Iid), 2, "run0", &ids, &ScoreMap::new()).unwrap();
        assert_eq!(plan.selected_example_ids.len(), 100);
        assert!(plan.weights.iter().all(|&w| w == 0.01));
        assert!((plan.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn plan_bounds_and_unknown_ids() {
        let ids = vec![id("a")];
        assert!(make_plan(&config(Strategy::Iid), 6, "r", &ids, &ScoreMap::new()).is_err());
        assert!(make_plan(&config(Strategy::Iid), 0, "r", &ids, &ScoreMap::new()).is_err());
        let m = scores(&[("zzz", 0.1)]);
        assert!(matches!(
            make_plan(&config(Strategy::PremBelowThreshold), 1, "r", &ids, &m),
            Err(Error::UnknownExample(_))
        ));
        let bad = config(Strategy::IfdTopPercentile { percentile: 100.0 });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn even_batches_sum_to_budget() {
        let c = CurationConfig::even_batches(Strategy::Iid, 0.75, 5, 103).unwrap();
        assert_eq!(c.batch_sizes, vec![21, 21, 21, 20, 20]);
        assert_eq!(c.total_budget(), 103);
    }

    #[test]
    fn examples_to_reach_interpolates() {
        let ledger = CurationLedger {
            initial_run_id: "r0".into(),
            initial_test_accuracy: 0.4,
            entries: vec![
                entry(10, 0.5),
                entry(20, 0.7),
            ],
        };
        assert_eq!(ledger.examples_to_reach(0.3), Some(0.0));
        assert!((ledger.examples_to_reach(0.6).unwrap() - 15.0).abs() < 1e-9);
        assert_eq!(ledger.examples_to_reach(0.8), None);
        assert_eq!(ledger.learning_curve().len(), 3);
    }

    fn entry(cumulative: usize, acc: f64) -> LedgerEntry {
        LedgerEntry {
            plan: CurationPlan {
                plan_id: "p".into(),
                iteration_index: 1,
                selected_example_ids: vec![],
                weights: vec![],
                requested_count: 0,
                provenance: Provenance {
                    strategy: "iid".into(),
                    threshold: None,
                    percentile: None,
                    source_run_id: "r".into(),
                },
            },
            ingested: vec![],
            resulting_run_id: "r".into(),
            resulting_test_accuracy: acc,
            cumulative_new_examples: cumulative,
        }
    }

    struct FailingTrainer;

    impl Trainer for FailingTrainer {
        fn train(&mut self) -> Result<TrainedRun> {
            Err(Error::EmptyCollection("nothing to train on"))
        }

        fn generate(&mut self, _: &CurationPlan, _: usize) -> Result<Vec<ExampleId>> {
            unreachable!()
        }
    }

    #[test]
    fn trainer_errors_carry_iteration() {
        let err = run_loop(&config(Strategy::Iid), MemorizationThreshold::new(2.0).unwrap(), &mut FailingTrainer)
            .unwrap_err();
        assert!(matches!(err, Error::Trainer { iteration: 1, .. }));
    }
}

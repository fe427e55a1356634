//! Per-example learning trajectories and the quantities computed over them:
//! sample accuracy, target-trace perplexity, masked accuracy and
//! pre-memorization accuracy.
//!
//! An example counts as memorized at a checkpoint when the perplexity of its
//! target solution trace is at or below the threshold `p`. Masked accuracy
//! zeroes the sample accuracy of memorized checkpoints, and pre-memorization
//! accuracy is
//!
//! ```text
//! premem(m) = min( max_{m' <= m} masked_acc(m'), acc(m) )
//! ```
//!
//! where `m` ranges over the checkpoints at or before the evaluation epoch.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of one dataset example, stable across checkpoints and runs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ExampleId(String);

impl ExampleId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::invalid("example id", "must be non-empty"));
        }
        Ok(ExampleId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ExampleId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        ExampleId::new(value)
    }
}

impl From<ExampleId> for String {
    fn from(id: ExampleId) -> Self {
        id.0
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => f.write_str("train"),
            Split::Test => f.write_str("test"),
        }
    }
}

/// Prompt variant an evaluation was made under.
///
/// Serialized as `"original"` or `"perturbed:<tag>"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variant {
    Original,
    Perturbed(String),
}

impl Variant {
    pub const ORIGINAL_TAG: &'static str = "original";

    /// Tag used as a key in analysis tables; `"original"` for the unperturbed prompt.
    pub fn tag(&self) -> &str {
        match self {
            Variant::Original => Self::ORIGINAL_TAG,
            Variant::Perturbed(tag) => tag,
        }
    }

    pub fn from_tag(tag: &str) -> Self {
        if tag == Self::ORIGINAL_TAG {
            Variant::Original
        } else {
            Variant::Perturbed(tag.to_string())
        }
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        if value == Self::ORIGINAL_TAG {
            return Ok(Variant::Original);
        }
        match value.strip_prefix("perturbed:") {
            Some(tag) if !tag.is_empty() => Ok(Variant::Perturbed(tag.to_string())),
            _ => Err(Error::invalid(
                "variant",
                format!("expected \"original\" or \"perturbed:<tag>\", got {value:?}"),
            )),
        }
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Original => Variant::ORIGINAL_TAG.to_string(),
            Variant::Perturbed(tag) => format!("perturbed:{tag}"),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Original => f.write_str(Self::ORIGINAL_TAG),
            Variant::Perturbed(tag) => write!(f, "perturbed:{tag}"),
        }
    }
}

/// Outcome of evaluating one example at one checkpoint of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    pub run_id: String,
    pub epoch: f64,
    pub example_id: ExampleId,
    pub split: Split,
    pub variant: Variant,
    pub n_samples: u32,
    pub n_correct: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_perplexity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greedy_loglik: Option<f64>,
}

impl EvalRecord {
    pub fn accuracy(&self) -> Result<f64> {
        accuracy_estimate(self.n_correct, self.n_samples)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub epoch: f64,
    pub accuracy: f64,
    pub perplexity: f64,
}

/// Checkpoint-ordered accuracy/perplexity history of one training example.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleTrajectory {
    example_id: ExampleId,
    points: Vec<TrajectoryPoint>,
}

impl ExampleTrajectory {
    pub fn new(example_id: ExampleId, points: Vec<TrajectoryPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCollection("trajectory points"));
        }
        for w in points.windows(2) {
            if !(w[0].epoch < w[1].epoch) {
                return Err(Error::invalid(
                    "trajectory",
                    format!(
                        "epochs of {example_id} must be strictly increasing ({} then {})",
                        w[0].epoch, w[1].epoch
                    ),
                ));
            }
        }
        for pt in &points {
            if !pt.epoch.is_finite() || pt.epoch < 0.0 {
                return Err(Error::invalid("epoch", format!("{} for {example_id}", pt.epoch)));
            }
            if !(0.0..=1.0).contains(&pt.accuracy) {
                return Err(Error::invalid("accuracy", format!("{} for {example_id}", pt.accuracy)));
            }
            if !(pt.perplexity >= 1.0) || !pt.perplexity.is_finite() {
                return Err(Error::invalid(
                    "perplexity",
                    format!("{} for {example_id}", pt.perplexity),
                ));
            }
        }
        Ok(ExampleTrajectory { example_id, points })
    }

    pub fn example_id(&self) -> &ExampleId {
        &self.example_id
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn final_epoch(&self) -> f64 {
        self.points[self.points.len() - 1].epoch
    }

    /// Pre-memorization accuracy evaluated at every checkpoint, in order.
    pub fn premem_curve(&self, p: MemorizationThreshold) -> Vec<f64> {
        let mut best_masked = 0.0_f64;
        self.points
            .iter()
            .map(|pt| {
                best_masked = best_masked.max(masked_accuracy(pt.accuracy, pt.perplexity, p));
                best_masked.min(pt.accuracy)
            })
            .collect()
    }
}

/// Perplexity cutoff at or below which an example counts as memorized.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MemorizationThreshold(f64);

impl MemorizationThreshold {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p > 0.0 {
            Ok(MemorizationThreshold(p))
        } else {
            Err(Error::invalid("memorization threshold", format!("{p} (must be finite and > 0)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for MemorizationThreshold {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        MemorizationThreshold::new(p)
    }
}

impl From<MemorizationThreshold> for f64 {
    fn from(p: MemorizationThreshold) -> Self {
        p.0
    }
}

pub fn accuracy_estimate(n_correct: u32, n_samples: u32) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::NoSamples);
    }
    if n_correct > n_samples {
        return Err(Error::invalid(
            "sample counts",
            format!("n_correct {n_correct} exceeds n_samples {n_samples}"),
        ));
    }
    Ok(f64::from(n_correct) / f64::from(n_samples))
}

/// `exp(-mean(token log-likelihoods))` of a target sequence.
pub fn perplexity(token_log_likelihoods: &[f64]) -> Result<f64> {
    if token_log_likelihoods.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut total = 0.0;
    for &ll in token_log_likelihoods {
        if !(ll <= 0.0) {
            return Err(Error::InvalidLogLikelihood(ll));
        }
        total += ll;
    }
    let mean = total / token_log_likelihoods.len() as f64;
    // exp of a non-negative value; max() guards against -0.0 rounding
    Ok((-mean).exp().max(1.0))
}

pub fn is_memorized(perplexity: f64, p: MemorizationThreshold) -> bool {
    perplexity <= p.0
}

pub fn masked_accuracy(accuracy: f64, perplexity: f64, p: MemorizationThreshold) -> f64 {
    if perplexity > p.0 {
        accuracy
    } else {
        0.0
    }
}

pub fn pre_memorization_accuracy(
    traj: &ExampleTrajectory,
    upto_epoch: f64,
    p: MemorizationThreshold,
) -> Result<f64> {
    let prefix = traj.points.iter().take_while(|pt| pt.epoch <= upto_epoch);
    let mut best_masked: Option<f64> = None;
    let mut current = 0.0;
    for pt in prefix {
        let masked = masked_accuracy(pt.accuracy, pt.perplexity, p);
        best_masked = Some(best_masked.map_or(masked, |b| b.max(masked)));
        current = pt.accuracy;
    }
    match best_masked {
        Some(best) => Ok(best.min(current)),
        None => Err(Error::TrajectoryEmptyAt {
            example_id: traj.example_id.to_string(),
            epoch: upto_epoch,
        }),
    }
}

/// Mean pre-memorization accuracy over a run's examples.
///
/// Examples are reduced in `example_id` order so the result does not depend
/// on the order the trajectories arrive in.
pub fn average_premem(
    run: &[ExampleTrajectory],
    upto_epoch: f64,
    p: MemorizationThreshold,
) -> Result<f64> {
    if run.is_empty() {
        return Err(Error::EmptyCollection("run trajectories"));
    }
    let mut ordered: Vec<&ExampleTrajectory> = run.iter().collect();
    ordered.sort_by(|a, b| a.example_id.cmp(&b.example_id));
    let mut total = 0.0;
    for traj in ordered {
        total += pre_memorization_accuracy(traj, upto_epoch, p)?;
    }
    Ok(total / run.len() as f64)
}

pub fn generalization_gap(train_acc: f64, test_acc: f64) -> f64 {
    train_acc - test_acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> MemorizationThreshold {
        MemorizationThreshold::new(v).unwrap()
    }

    fn traj(points: &[(f64, f64, f64)]) -> ExampleTrajectory {
        ExampleTrajectory::new(
            ExampleId::new("ex").unwrap(),
            points
                .iter()
                .map(|&(epoch, accuracy, perplexity)| TrajectoryPoint {
                    epoch,
                    accuracy,
                    perplexity,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn accuracy_estimate_values() {
        assert_eq!(accuracy_estimate(0, 16).unwrap(), 0.0);
        assert_eq!(accuracy_estimate(16, 16).unwrap(), 1.0);
        assert_eq!(accuracy_estimate(12, 16).unwrap(), 0.75);
        assert!(matches!(accuracy_estimate(0, 0), Err(Error::NoSamples)));
        assert!(accuracy_estimate(5, 4).is_err());
    }

    #[test]
    fn perplexity_values() {
        assert_eq!(perplexity(&[0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert!((perplexity(&[-0.5, -1.5]).unwrap() - 1.0_f64.exp()).abs() < 1e-12);
        assert!((perplexity(&[-2.0]).unwrap() - 7.38905609893065).abs() < 1e-12);
        assert!(matches!(perplexity(&[]), Err(Error::EmptySequence)));
        assert!(matches!(perplexity(&[-1.0, 0.1]), Err(Error::InvalidLogLikelihood(_))));
    }

    #[test]
    fn memorization_boundary() {
        assert!(is_memorized(1.0, p(1.5)));
        assert!(!is_memorized(5.0, p(1.5)));
        assert!(is_memorized(1.5, p(1.5)));
    }

    #[test]
    fn masked_accuracy_values() {
        assert_eq!(masked_accuracy(0.8, 4.0, p(1.5)), 0.8);
        assert_eq!(masked_accuracy(0.8, 1.2, p(1.5)), 0.0);
        assert_eq!(masked_accuracy(0.0, 4.0, p(1.5)), 0.0);
    }

    #[test]
    fn premem_examples() {
        let single = traj(&[(1.0, 0.4, 5.0)]);
        assert_eq!(pre_memorization_accuracy(&single, 1.0, p(1.5)).unwrap(), 0.4);

        let always = traj(&[(1.0, 0.5, 1.0), (2.0, 0.9, 1.0), (3.0, 1.0, 1.0)]);
        for upto in [1.0, 2.0, 3.0] {
            assert_eq!(pre_memorization_accuracy(&always, upto, p(1.5)).unwrap(), 0.0);
        }

        let three = traj(&[(1.0, 0.2, 4.0), (2.0, 0.6, 2.5), (3.0, 1.0, 1.05)]);
        assert_eq!(pre_memorization_accuracy(&three, 3.0, p(1.5)).unwrap(), 0.6);
        assert_eq!(pre_memorization_accuracy(&three, 1.5, p(1.5)).unwrap(), 0.2);
    }

    #[test]
    fn premem_current_accuracy_caps_result() {
        // accuracy drops after the best unmemorized checkpoint
        let t = traj(&[(1.0, 0.8, 4.0), (2.0, 0.3, 3.0)]);
        assert_eq!(pre_memorization_accuracy(&t, 2.0, p(1.5)).unwrap(), 0.3);
    }

    #[test]
    fn premem_before_first_checkpoint_errors() {
        let t = traj(&[(1.0, 0.4, 5.0)]);
        assert!(matches!(
            pre_memorization_accuracy(&t, 0.5, p(1.5)),
            Err(Error::TrajectoryEmptyAt { .. })
        ));
    }

    #[test]
    fn premem_curve_matches_pointwise() {
        let t = traj(&[(0.5, 0.1, 9.0), (1.0, 0.5, 3.0), (2.0, 0.4, 1.4), (3.0, 0.9, 1.1)]);
        let curve = t.premem_curve(p(1.5));
        for (pt, v) in t.points().iter().zip(&curve) {
            assert_eq!(pre_memorization_accuracy(&t, pt.epoch, p(1.5)).unwrap(), *v);
        }
    }

    #[test]
    fn average_premem_values() {
        let a = ExampleTrajectory::new(
            ExampleId::new("a").unwrap(),
            vec![TrajectoryPoint { epoch: 1.0, accuracy: 0.0, perplexity: 3.0 }],
        )
        .unwrap();
        let b = ExampleTrajectory::new(
            ExampleId::new("b").unwrap(),
            vec![TrajectoryPoint { epoch: 1.0, accuracy: 1.0, perplexity: 3.0 }],
        )
        .unwrap();
        assert_eq!(average_premem(&[a.clone(), b.clone()], 1.0, p(1.5)).unwrap(), 0.5);
        assert_eq!(average_premem(&[a, b], 1.0, p(5.0)).unwrap(), 0.0);
        assert!(average_premem(&[], 1.0, p(1.5)).is_err());
    }

    #[test]
    fn generalization_gap_values() {
        assert!((generalization_gap(1.0, 0.6) - 0.4).abs() < 1e-15);
        assert_eq!(generalization_gap(0.5, 0.5), 0.0);
        assert!((generalization_gap(0.4, 0.7) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn trajectory_rejects_unsorted_and_empty() {
        let id = ExampleId::new("x").unwrap();
        assert!(ExampleTrajectory::new(id.clone(), vec![]).is_err());
        let pts = vec![
            TrajectoryPoint { epoch: 2.0, accuracy: 0.1, perplexity: 2.0 },
            TrajectoryPoint { epoch: 2.0, accuracy: 0.1, perplexity: 2.0 },
        ];
        assert!(ExampleTrajectory::new(id, pts).is_err());
        assert!(ExampleId::new("").is_err());
        assert!(MemorizationThreshold::new(0.0).is_err());
    }

    #[test]
    fn variant_string_form() {
        let v: Variant = serde_json::from_str("\"perturbed:We know that\"").unwrap();
        assert_eq!(v, Variant::Perturbed("We know that".into()));
        assert_eq!(serde_json::to_string(&Variant::Original).unwrap(), "\"original\"");
        assert!(serde_json::from_str::<Variant>("\"perturbed:\"").is_err());
        assert!(serde_json::from_str::<Variant>("\"other\"").is_err());
    }
}

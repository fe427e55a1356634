//! Reference generalization metrics and data-difficulty scores used as
//! comparisons: gradient variance, distance from initialization, Average
//! Thresholded Confidence (ATC), Instruction-Following Difficulty (IFD) and
//! manifest-based heuristic difficulty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::ManifestRow;
use crate::trajectory::{ExampleId, Split};

/// Flat export of weights or gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericVector {
    pub label: String,
    values: Vec<f64>,
}

impl NumericVector {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if values.is_empty() {
            return Err(Error::EmptyCollection("numeric vector"));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("numeric vector", format!("{label}: element {bad} is not finite")));
        }
        Ok(NumericVector { label, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub example_id: ExampleId,
    pub score: f64,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtcThreshold {
    pub threshold: f64,
    pub reference_accuracy: f64,
}

/// Mean over elements of the population variance across snapshots.
pub fn gradient_variance(snapshots: &[NumericVector]) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(Error::invalid(
            "gradient snapshots",
            format!("need at least 2, got {}", snapshots.len()),
        ));
    }
    let dim = snapshots[0].len();
    if let Some(bad) = snapshots.iter().find(|s| s.len() != dim) {
        return Err(Error::LengthMismatch { expected: dim, found: bad.len() });
    }
    let k = snapshots.len() as f64;
    let mut total = 0.0;
    for i in 0..dim {
        let mean = snapshots.iter().map(|s| s.values[i]).sum::<f64>() / k;
        let var = snapshots.iter().map(|s| (s.values[i] - mean).powi(2)).sum::<f64>() / k;
        total += var;
    }
    Ok(total / dim as f64)
}

/// Sum of squared element-wise differences.
pub fn distance_from_init(w_init: &NumericVector, w_final: &NumericVector) -> Result<f64> {
    if w_init.len() != w_final.len() {
        return Err(Error::LengthMismatch { expected: w_init.len(), found: w_final.len() });
    }
    Ok(w_init
        .values
        .iter()
        .zip(&w_final.values)
        .map(|(a, b)| (b - a) * (b - a))
        .sum())
}

/// Fits the score threshold whose strictly-above fraction on the reference
/// scores is closest to the reference accuracy.
///
/// Candidate thresholds sit at the maximum score (nothing above), at the
/// midpoints between adjacent distinct scores, and one unit below the
/// minimum (everything above). Equally close candidates resolve to the
/// higher threshold.
pub fn atc_fit(reference_scores: &[ScoreRecord], reference_test_accuracy: f64) -> Result<AtcThreshold> {
    if reference_scores.is_empty() {
        return Err(Error::EmptyCollection("reference scores"));
    }
    if !(0.0..=1.0).contains(&reference_test_accuracy) {
        return Err(Error::invalid("reference accuracy", reference_test_accuracy.to_string()));
    }
    check_scores(reference_scores, Split::Test)?;

    let mut distinct: Vec<f64> = reference_scores.iter().map(|r| r.score).collect();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    let n = reference_scores.len() as f64;

    let mut candidates = Vec::with_capacity(distinct.len() + 1);
    candidates.push(distinct[0]);
    for w in distinct.windows(2) {
        candidates.push(w[1] + (w[0] - w[1]) / 2.0);
    }
    candidates.push(distinct[distinct.len() - 1] - 1.0);

    let mut best = candidates[0];
    let mut best_gap = f64::INFINITY;
    for t in candidates {
        let above = reference_scores.iter().filter(|r| r.score > t).count() as f64 / n;
        let gap = (above - reference_test_accuracy).abs();
        if gap < best_gap {
            best_gap = gap;
            best = t;
        }
    }
    Ok(AtcThreshold { threshold: best, reference_accuracy: reference_test_accuracy })
}

/// Fraction of scores strictly above the fitted threshold.
pub fn atc_predict(threshold: &AtcThreshold, target_scores: &[ScoreRecord]) -> Result<f64> {
    if target_scores.is_empty() {
        return Err(Error::EmptyCollection("target scores"));
    }
    check_scores(target_scores, Split::Train)?;
    let above = target_scores.iter().filter(|r| r.score > threshold.threshold).count();
    Ok(above as f64 / target_scores.len() as f64)
}

fn check_scores(scores: &[ScoreRecord], split: Split) -> Result<()> {
    for r in scores {
        if !r.score.is_finite() {
            return Err(Error::invalid("score", format!("{} for {}", r.score, r.example_id)));
        }
        if r.split != split {
            return Err(Error::invalid(
                "score split",
                format!("{} is a {} score, expected {split}", r.example_id, r.split),
            ));
        }
    }
    Ok(())
}

/// Instruction-Following Difficulty: label perplexity given the input over
/// label-only perplexity.
pub fn ifd_score(perp_label_given_input: f64, perp_label_only: f64) -> Result<f64> {
    for v in [perp_label_given_input, perp_label_only] {
        if !(v >= 1.0) || !v.is_finite() {
            return Err(Error::invalid("perplexity", format!("{v} (must be finite and >= 1)")));
        }
    }
    Ok(perp_label_given_input / perp_label_only)
}

/// Solution line count when the manifest has it, otherwise the dataset's
/// difficulty level.
pub fn heuristic_difficulty(row: &ManifestRow) -> Result<f64> {
    match (row.n_solution_lines, row.level) {
        (Some(lines), _) => Ok(f64::from(lines)),
        (None, Some(level)) => Ok(f64::from(level)),
        (None, None) => Err(Error::NoDifficultyMetadata(row.example_id.to_string())),
    }
}

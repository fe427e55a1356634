//! Memorization-threshold calibration and fit statistics.
//!
//! The threshold `p` is chosen by sweeping a grid and keeping the value whose
//! average pre-memorization train accuracy best matches test accuracy, where
//! "best" is the coefficient of determination against the identity line.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::trajectory::{ExampleId, ExampleTrajectory, MemorizationThreshold};

/// One marker of a predicted-vs-actual scatter: a checkpoint of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCheckpointPoint {
    pub run_id: String,
    pub epoch: f64,
    pub predictor_value: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdGrid {
    values: Vec<f64>,
}

impl ThresholdGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyCollection("threshold grid"));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid("threshold grid", "values must be finite and > 0"));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("threshold grid", "values must be strictly increasing"));
        }
        Ok(ThresholdGrid { values })
    }

    pub fn linear(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(spaced(lo, hi, n, |t| lo + (hi - lo) * t)?)
    }

    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0) {
            return Err(Error::invalid("threshold grid", "log spacing needs lo > 0"));
        }
        let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
        Self::new(spaced(lo, hi, n, |t| (ln_lo + (ln_hi - ln_lo) * t).exp())?)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn spaced(lo: f64, hi: f64, n: usize, at: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptyCollection("threshold grid"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    if !(lo < hi) {
        return Err(Error::invalid("threshold grid", format!("need lo < hi, got {lo}..{hi}")));
    }
    // endpoints are pinned so "1:3:21" contains exactly 1.0 and 3.0
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => at(i as f64 / (n - 1) as f64),
        })
        .collect())
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        ThresholdGrid::log_spaced(1.0, 16.0, 61).expect("default grid is valid")
    }
}

/// Parses `lo:hi:n` (linear) or `lo:hi:nlog` (log-spaced).
impl FromStr for ThresholdGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid("grid spec", format!("{s:?} (expected lo:hi:n or lo:hi:nlog)"));
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(bad());
        };
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let n = n.trim();
        match n.strip_suffix("log") {
            Some(count) => Self::log_spaced(lo, hi, count.parse().map_err(|_| bad())?),
            None => Self::linear(lo, hi, n.parse().map_err(|_| bad())?),
        }
    }
}

impl TryFrom<Vec<f64>> for ThresholdGrid {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ThresholdGrid::new(values)
    }
}

impl From<ThresholdGrid> for Vec<f64> {
    fn from(g: ThresholdGrid) -> Self {
        g.values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub grid: ThresholdGrid,
    pub r2_per_threshold: Vec<f64>,
    pub selected_p: f64,
    pub selected_r2: f64,
}

impl CalibrationResult {
    pub fn selected_threshold(&self) -> MemorizationThreshold {
        MemorizationThreshold::new(self.selected_p).expect("grid values are positive")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: f64,
    pub test_accuracy: f64,
}

/// A training run as seen by calibration: train trajectories plus the test
/// accuracy measured at some of its checkpoints.
#[derive(Debug, Clone)]
pub struct RunObservation {
    pub run_id: String,
    pub trajectories: Vec<ExampleTrajectory>,
    pub checkpoints: Vec<Checkpoint>,
}

/// Coefficient of determination of `target` against the prediction `predictor`
/// (identity line, no fitted slope or intercept).
pub fn r2_identity(points: &[(f64, f64)]) -> Result<f64> {
    let ss_tot = target_sum_of_squares(points)?;
    let ss_res: f64 = points.iter().map(|(x, y)| (y - x) * (y - x)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// R² of the least-squares line through the points (diagnostic only).
pub fn r2_fitted_line(points: &[(f64, f64)]) -> Result<f64> {
    let r = pearson(points)?;
    Ok(r * r)
}

fn target_sum_of_squares(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!("need at least 2 points, got {}", points.len())));
    }
    let mean = points.iter().map(|(_, y)| y).sum::<f64>() / points.len() as f64;
    let ss_tot: f64 = points.iter().map(|(_, y)| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateFit("target values have zero variance".into()));
    }
    Ok(ss_tot)
}

pub fn pearson(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!("need at least 2 points, got {}", points.len())));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in points {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateFit("zero variance in a coordinate".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation, average ranks for ties.
pub fn spearman(points: &[(f64, f64)]) -> Result<f64> {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let ranked: Vec<(f64, f64)> = average_ranks(&xs).into_iter().zip(average_ranks(&ys)).collect();
    pearson(&ranked)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Average pre-memorization accuracy of every test-bearing checkpoint of every
/// run, paired with that checkpoint's test accuracy.
pub fn predict_points(
    runs: &[RunObservation],
    p: MemorizationThreshold,
) -> Result<Vec<RunCheckpointPoint>> {
    let mut out = Vec::new();
    for run in runs {
        if run.trajectories.is_empty() {
            return Err(Error::EmptyCollection("run trajectories"));
        }
        let mut ordered: Vec<&ExampleTrajectory> = run.trajectories.iter().collect();
        ordered.sort_by(|a, b| a.example_id().cmp(b.example_id()));
        let curves: Vec<Vec<f64>> = ordered.iter().map(|t| t.premem_curve(p)).collect();
        for cp in &run.checkpoints {
            let mut total = 0.0;
            for (traj, curve) in ordered.iter().zip(&curves) {
                let idx = traj.points().partition_point(|pt| pt.epoch <= cp.epoch);
                if idx == 0 {
                    return Err(Error::TrajectoryEmptyAt {
                        example_id: traj.example_id().to_string(),
                        epoch: cp.epoch,
                    });
                }
                total += curve[idx - 1];
            }
            out.push(RunCheckpointPoint {
                run_id: run.run_id.clone(),
                epoch: cp.epoch,
                predictor_value: total / ordered.len() as f64,
                test_accuracy: cp.test_accuracy,
            });
        }
    }
    Ok(out)
}

pub fn as_pairs(points: &[RunCheckpointPoint]) -> Vec<(f64, f64)> {
    points.iter().map(|pt| (pt.predictor_value, pt.test_accuracy)).collect()
}

pub fn sweep_threshold(runs: &[RunObservation], grid: &ThresholdGrid) -> Result<CalibrationResult> {
    if runs.is_empty() {
        return Err(Error::EmptyCollection("comparison set"));
    }
    let mut r2s = Vec::with_capacity(grid.values().len());
    for &p in grid.values() {
        let points = predict_points(runs, MemorizationThreshold::new(p)?)?;
        match r2_identity(&as_pairs(&points)) {
            Ok(r2) => r2s.push(r2),
            Err(e) => {
                return Err(Error::DegenerateFit(format!(
                    "{e} at every threshold ({} grid values {}..{}, {} checkpoint points)",
                    grid.values().len(),
                    grid.values()[0],
                    grid.values()[grid.values().len() - 1],
                    points.len()
                )))
            }
        }
    }
    let mut best = 0;
    for (i, &r2) in r2s.iter().enumerate() {
        if r2 > r2s[best] {
            best = i;
        }
    }
    Ok(CalibrationResult {
        selected_p: grid.values()[best],
        selected_r2: r2s[best],
        grid: grid.clone(),
        r2_per_threshold: r2s,
    })
}

/// Seeded split of run ids into `k` calibration runs and the heldout rest.
pub fn split_runs_calibration(
    run_ids: &[String],
    k: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    let mut ids: Vec<String> = run_ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if k < 1 || k >= ids.len() {
        return Err(Error::invalid(
            "calibration run count",
            format!("k = {k} must satisfy 1 <= k < {}", ids.len()),
        ));
    }
    ids.shuffle(&mut rng::stream(seed, &["split-runs"]));
    let heldout = ids.split_off(k);
    ids.sort();
    let mut heldout = heldout;
    heldout.sort();
    Ok((ids, heldout))
}

/// Seeded partition of test example ids into a calibration part holding
/// `round(fraction * n)` ids and a heldout part with the rest.
pub fn split_test_examples(
    example_ids: &[ExampleId],
    fraction: f64,
    seed: u64,
) -> Result<(BTreeSet<ExampleId>, BTreeSet<ExampleId>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("split fraction", format!("{fraction} not in (0, 1)")));
    }
    let mut ids: Vec<ExampleId> = example_ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if ids.is_empty() {
        return Err(Error::EmptyCollection("test examples"));
    }
    ids.shuffle(&mut rng::stream(seed, &["split-test"]));
    let n_cal = (fraction * ids.len() as f64).round() as usize;
    let heldout = ids.split_off(n_cal);
    Ok((ids.into_iter().collect(), heldout.into_iter().collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeldoutEvaluation {
    pub calibration: CalibrationResult,
    pub heldout_r2: f64,
}

/// Calibrates `p` on one comparison set and scores it on another.
pub fn evaluate_heldout(
    calibration_runs: &[RunObservation],
    heldout_runs: &[RunObservation],
    grid: &ThresholdGrid,
) -> Result<HeldoutEvaluation> {
    let calibration = sweep_threshold(calibration_runs, grid)?;
    let points = predict_points(heldout_runs, calibration.selected_threshold())?;
    let heldout_r2 = r2_identity(&as_pairs(&points))?;
    Ok(HeldoutEvaluation { calibration, heldout_r2 })
}

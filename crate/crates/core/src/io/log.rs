//! Evaluation logs: newline-delimited JSON, a schema header object first,
//! then one [`EvalRecord`] per line.
//!
//! ```text
//! {"schema":"premem-eval-log","version":1}
//! {"run_id":"lr2e-5","epoch":1.0,"example_id":"gsm-0001","split":"train","variant":"original","n_samples":16,"n_correct":9,"target_perplexity":3.41}
//! {"run_id":"lr2e-5","epoch":1.0,"example_id":"gsm-test-0001","split":"test","variant":"original","n_samples":16,"n_correct":7}
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{numbered_lines, ManifestRow, ValidationError};
use crate::calibration::{Checkpoint, RunObservation};
use crate::trajectory::{EvalRecord, ExampleId, ExampleTrajectory, Split, TrajectoryPoint, Variant};

pub const LOG_SCHEMA: &str = "premem-eval-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub schema: String,
    pub version: u32,
    /// Free-form producer metadata (sampling temperature, sample count, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Default for LogHeader {
    fn default() -> Self {
        LogHeader { schema: LOG_SCHEMA.into(), version: LOG_VERSION, metadata: BTreeMap::new() }
    }
}

pub fn write_log(header: &LogHeader, records: &[EvalRecord]) -> String {
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Epoch as an ordered map key (epochs are finite and non-negative).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct EpochKey(u64);

impl EpochKey {
    fn new(epoch: f64) -> Self {
        EpochKey((epoch + 0.0).to_bits())
    }

    fn epoch(self) -> f64 {
        f64::from_bits(self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    pub epoch: f64,
    pub example_id: ExampleId,
    pub accuracy: f64,
}

/// One run of a validated log.
#[derive(Debug, Clone)]
pub struct RunData {
    pub run_id: String,
    /// Checkpoint grid shared by every training example.
    pub epochs: Vec<f64>,
    /// Train-split original-prompt trajectories, ordered by example id.
    pub trajectories: Vec<ExampleTrajectory>,
    pub test_records: Vec<TestRecord>,
}

impl RunData {
    pub fn test_example_ids(&self) -> Vec<ExampleId> {
        self.test_records.iter().map(|r| r.example_id.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Calibration view of the run. Test accuracy per checkpoint is the mean
    /// over test examples (restricted to `test_filter` when given).
    /// Checkpoints without test records are skipped and reported in the
    /// returned warnings.
    pub fn observation(&self, test_filter: Option<&BTreeSet<ExampleId>>) -> (RunObservation, Vec<String>) {
        let mut per_epoch: BTreeMap<EpochKey, Vec<(&ExampleId, f64)>> = BTreeMap::new();
        for r in &self.test_records {
            if test_filter.is_none_or(|f| f.contains(&r.example_id)) {
                per_epoch.entry(EpochKey::new(r.epoch)).or_default().push((&r.example_id, r.accuracy));
            }
        }
        let mut warnings = Vec::new();
        for &e in &self.epochs {
            if !per_epoch.contains_key(&EpochKey::new(e)) {
                warnings.push(format!("run {}: checkpoint {e} has no test records; excluded", self.run_id));
            }
        }
        let first = self.epochs.first().copied().unwrap_or(0.0);
        let checkpoints = per_epoch
            .into_iter()
            .filter_map(|(key, mut values)| {
                let epoch = key.epoch();
                if epoch < first {
                    warnings.push(format!(
                        "run {}: test checkpoint {epoch} precedes the first train checkpoint; excluded",
                        self.run_id
                    ));
                    return None;
                }
                values.sort_by(|a, b| a.0.cmp(b.0));
                let mean = values.iter().map(|v| v.1).sum::<f64>() / values.len() as f64;
                Some(Checkpoint { epoch, test_accuracy: mean })
            })
            .collect();
        for w in &warnings {
            log::warn!("{w}");
        }
        (
            RunObservation { run_id: self.run_id.clone(), trajectories: self.trajectories.clone(), checkpoints },
            warnings,
        )
    }
}

#[derive(Debug, Clone)]
pub struct ValidatedLog {
    pub header: LogHeader,
    pub records: Vec<EvalRecord>,
    pub runs: BTreeMap<String, RunData>,
}

impl ValidatedLog {
    pub fn observations(&self, test_filter: Option<&BTreeSet<ExampleId>>) -> (Vec<RunObservation>, Vec<String>) {
        let mut obs = Vec::new();
        let mut warnings = Vec::new();
        for run in self.runs.values() {
            let (o, w) = run.observation(test_filter);
            obs.push(o);
            warnings.extend(w);
        }
        (obs, warnings)
    }

    pub fn test_example_ids(&self) -> Vec<ExampleId> {
        self.runs
            .values()
            .flat_map(|r| r.test_example_ids())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn run(&self, run_id: &str) -> Option<&RunData> {
        self.runs.get(run_id)
    }

    /// Records of one run at one checkpoint, any split and variant.
    pub fn records_at(&self, run_id: &str, epoch: f64) -> Vec<&EvalRecord> {
        self.records.iter().filter(|r| r.run_id == run_id && r.epoch == epoch).collect()
    }
}

pub fn validate(text: &str, manifest: Option<&[ManifestRow]>) -> Result<ValidatedLog, Vec<ValidationError>> {
    validate_bytes(text.as_bytes(), manifest)
}

/// Parses and checks a log. Never panics; returns every problem found, in
/// line order.
pub fn validate_bytes(bytes: &[u8], manifest: Option<&[ManifestRow]>) -> Result<ValidatedLog, Vec<ValidationError>> {
    let mut errors = Vec::new();
    let lines = numbered_lines(bytes);
    let mut iter = lines.into_iter();

    let header = match iter.next() {
        None => {
            return Err(vec![ValidationError::file("empty log: missing schema header")]);
        }
        Some((line, Err(e))) => {
            errors.push(e);
            let _ = line;
            None
        }
        Some((line, Ok(text))) => match serde_json::from_str::<LogHeader>(text) {
            Ok(h) if h.schema == LOG_SCHEMA && h.version == LOG_VERSION => Some(h),
            Ok(h) => {
                errors.push(ValidationError::at(
                    line,
                    format!("unsupported schema {:?} version {} (expected {LOG_SCHEMA:?} version {LOG_VERSION})", h.schema, h.version),
                ));
                None
            }
            Err(e) => {
                errors.push(ValidationError::at(line, format!("first line must be the schema header: {e}")));
                None
            }
        },
    };

    let manifest_ids: Option<BTreeSet<&ExampleId>> = manifest.map(|m| m.iter().map(|r| &r.example_id).collect());

    type Key = (String, EpochKey, ExampleId, Variant, Split);
    let mut seen: BTreeMap<Key, usize> = BTreeMap::new();
    let mut records: Vec<(usize, EvalRecord)> = Vec::new();

    for (line, text) in iter {
        let text = match text {
            Ok(t) => t,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        if text.trim().is_empty() {
            errors.push(ValidationError::at(line, "blank line"));
            continue;
        }
        let rec: EvalRecord = match serde_json::from_str(text) {
            Ok(r) => r,
            Err(e) => {
                errors.push(ValidationError::at(line, format!("malformed record: {e}")));
                continue;
            }
        };
        let before = errors.len();
        check_record(line, &rec, &mut errors);
        if let Some(ids) = &manifest_ids {
            if rec.split == Split::Train && !ids.contains(&rec.example_id) {
                errors.push(ValidationError::at(line, format!("unknown example_id {} (not in manifest)", rec.example_id)));
            }
        }
        if rec.epoch.is_finite() {
            let key = (rec.run_id.clone(), EpochKey::new(rec.epoch), rec.example_id.clone(), rec.variant.clone(), rec.split);
            if let Some(&prev) = seen.get(&key) {
                errors.push(ValidationError::at(
                    line,
                    format!(
                        "duplicate key (run {}, epoch {}, example {}, {}, {}) first seen on line {prev}",
                        rec.run_id, rec.epoch, rec.example_id, rec.variant, rec.split
                    ),
                ));
                continue;
            }
            seen.insert(key, line);
        }
        if errors.len() == before {
            records.push((line, rec));
        }
    }

    let runs = assemble_runs(&records, &mut errors);

    errors.sort();
    match header {
        Some(header) if errors.is_empty() => Ok(ValidatedLog {
            header,
            records: records.into_iter().map(|(_, r)| r).collect(),
            runs,
        }),
        _ => Err(errors),
    }
}

fn check_record(line: usize, rec: &EvalRecord, errors: &mut Vec<ValidationError>) {
    if rec.run_id.is_empty() {
        errors.push(ValidationError::at(line, "empty run_id"));
    }
    if !rec.epoch.is_finite() || rec.epoch < 0.0 {
        errors.push(ValidationError::at(line, format!("epoch {} must be finite and >= 0", rec.epoch)));
    }
    if rec.n_samples == 0 {
        errors.push(ValidationError::at(line, "n_samples is 0 (no samples)"));
    }
    if rec.n_correct > rec.n_samples {
        errors.push(ValidationError::at(
            line,
            format!("n_correct {} exceeds n_samples {}", rec.n_correct, rec.n_samples),
        ));
    }
    match rec.target_perplexity {
        Some(p) if !(p.is_finite() && p >= 1.0) => {
            errors.push(ValidationError::at(line, format!("target_perplexity {p} must be finite and >= 1")))
        }
        None if rec.split == Split::Train && rec.variant == Variant::Original => errors.push(ValidationError::at(
            line,
            "train record for the original prompt lacks target_perplexity",
        )),
        _ => {}
    }
    if let Some(g) = rec.greedy_loglik {
        if !(g.is_finite() && g <= 0.0) {
            errors.push(ValidationError::at(line, format!("greedy_loglik {g} must be finite and <= 0")));
        }
    }
}

fn assemble_runs(records: &[(usize, EvalRecord)], errors: &mut Vec<ValidationError>) -> BTreeMap<String, RunData> {
    struct Partial<'a> {
        grid: BTreeSet<EpochKey>,
        examples: BTreeMap<&'a ExampleId, (usize, BTreeMap<EpochKey, TrajectoryPoint>)>,
        tests: Vec<TestRecord>,
    }
    let mut partial: BTreeMap<&str, Partial> = BTreeMap::new();
    for (line, rec) in records {
        let run = partial.entry(rec.run_id.as_str()).or_insert_with(|| Partial {
            grid: BTreeSet::new(),
            examples: BTreeMap::new(),
            tests: Vec::new(),
        });
        let accuracy = f64::from(rec.n_correct) / f64::from(rec.n_samples);
        match (rec.split, &rec.variant) {
            (Split::Train, Variant::Original) => {
                let key = EpochKey::new(rec.epoch);
                run.grid.insert(key);
                let entry = run.examples.entry(&rec.example_id).or_insert_with(|| (*line, BTreeMap::new()));
                entry.0 = entry.0.min(*line);
                entry.1.insert(
                    key,
                    TrajectoryPoint {
                        epoch: rec.epoch,
                        accuracy,
                        perplexity: rec.target_perplexity.unwrap_or(f64::NAN),
                    },
                );
            }
            (Split::Test, Variant::Original) => run.tests.push(TestRecord {
                epoch: rec.epoch,
                example_id: rec.example_id.clone(),
                accuracy,
            }),
            _ => {}
        }
    }

    let mut runs = BTreeMap::new();
    for (run_id, part) in partial {
        let mut ok = true;
        let mut trajectories = Vec::with_capacity(part.examples.len());
        for (id, (first_line, points)) in &part.examples {
            let missing: Vec<String> = part
                .grid
                .iter()
                .filter(|k| !points.contains_key(k))
                .map(|k| k.epoch().to_string())
                .collect();
            if !missing.is_empty() {
                ok = false;
                errors.push(ValidationError::at(
                    *first_line,
                    format!(
                        "checkpoint gap: example {id} in run {run_id} lacks epoch(s) {} present for other examples",
                        missing.join(", ")
                    ),
                ));
                continue;
            }
            match ExampleTrajectory::new((*id).clone(), points.values().copied().collect()) {
                Ok(t) => trajectories.push(t),
                Err(e) => {
                    ok = false;
                    errors.push(ValidationError::at(*first_line, e.to_string()));
                }
            }
        }
        if ok {
            runs.insert(
                run_id.to_string(),
                RunData {
                    run_id: run_id.to_string(),
                    epochs: part.grid.iter().map(|k| k.epoch()).collect(),
                    trajectories,
                    test_records: part.tests,
                },
            );
        }
    }
    runs
}

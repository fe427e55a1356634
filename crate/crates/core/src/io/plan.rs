//! Curation plan export and new-example ingestion.
//!
//! A plan file starts with a header object and lists one
//! `{"example_id", "weight"}` object per line. An ingestion file lists the
//! collected examples, each naming the plan it was collected for and the
//! plan example it was derived from.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{numbered_lines, ManifestRow, ValidationError};
use crate::curation::{CurationPlan, Provenance};
use crate::error::{Error, Result};
use crate::trajectory::ExampleId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanHeader {
    pub plan_id: String,
    pub iteration: usize,
    pub requested_count: usize,
    pub strategy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percentile: Option<f64>,
    pub source_run_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanWeight {
    pub example_id: ExampleId,
    pub weight: f64,
}

pub fn write_plan(plan: &CurationPlan) -> String {
    let header = PlanHeader {
        plan_id: plan.plan_id.clone(),
        iteration: plan.iteration_index,
        requested_count: plan.requested_count,
        strategy: plan.provenance.strategy.clone(),
        threshold: plan.provenance.threshold,
        percentile: plan.provenance.percentile,
        source_run_id: plan.provenance.source_run_id.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (id, &weight) in plan.selected_example_ids.iter().zip(&plan.weights) {
        let row = PlanWeight { example_id: id.clone(), weight };
        out.push_str(&serde_json::to_string(&row).expect("row serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_plan(bytes: &[u8]) -> Result<CurationPlan> {
    let mut lines = numbered_lines(bytes).into_iter();
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty plan file".into()))?;
    let first = first.map_err(|e| parse_err(1, e.message))?;
    let header: PlanHeader = serde_json::from_str(first).map_err(|e| parse_err(1, format!("plan header: {e}")))?;
    let mut ids = Vec::new();
    let mut weights = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, text) in lines {
        let text = text.map_err(|e| parse_err(line, e.message))?;
        let row: PlanWeight = serde_json::from_str(text).map_err(|e| parse_err(line, e.to_string()))?;
        if !(row.weight.is_finite() && row.weight >= 0.0) {
            return Err(parse_err(line, format!("weight {} must be finite and >= 0", row.weight)));
        }
        if !seen.insert(row.example_id.clone()) {
            return Err(parse_err(line, format!("duplicate example_id {}", row.example_id)));
        }
        ids.push(row.example_id);
        weights.push(row.weight);
    }
    if ids.is_empty() {
        return Err(Error::EmptyCollection("plan examples"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("plan weights", format!("sum to {total}, expected 1")));
    }
    Ok(CurationPlan {
        plan_id: header.plan_id,
        iteration_index: header.iteration,
        selected_example_ids: ids,
        weights,
        requested_count: header.requested_count,
        provenance: Provenance {
            strategy: header.strategy,
            threshold: header.threshold,
            percentile: header.percentile,
            source_run_id: header.source_run_id,
        },
    })
}

/// One collected example as supplied by the external generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestedExample {
    pub plan_id: String,
    pub source_example_id: ExampleId,
    pub example_id: ExampleId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_solution: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestionReport {
    pub accepted: Vec<IngestedExample>,
    pub rejected: Vec<ValidationError>,
}

impl IngestionReport {
    /// Manifest rows for accepted examples that carry query and solution text.
    pub fn manifest_rows(&self) -> Vec<ManifestRow> {
        self.accepted
            .iter()
            .filter_map(|a| {
                let (query, solution) = (a.query.as_ref()?, a.target_solution.as_ref()?);
                Some(ManifestRow {
                    example_id: a.example_id.clone(),
                    query: query.clone(),
                    target_solution: solution.clone(),
                    n_solution_lines: Some(solution.lines().count() as u32),
                    level: None,
                })
            })
            .collect()
    }
}

/// Checks collected examples against the plan: each must reference the
/// plan's id and one of its selected examples, and introduce an id not
/// already in the dataset.
pub fn ingest(plan: &CurationPlan, bytes: &[u8], existing: Option<&[ManifestRow]>) -> IngestionReport {
    let selected: BTreeSet<&ExampleId> = plan.selected_example_ids.iter().collect();
    let mut taken: BTreeSet<ExampleId> = existing.into_iter().flatten().map(|r| r.example_id.clone()).collect();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for (line, text) in numbered_lines(bytes) {
        let text = match text {
            Ok(t) => t,
            Err(e) => {
                rejected.push(e);
                continue;
            }
        };
        let row: IngestedExample = match serde_json::from_str(text) {
            Ok(r) => r,
            Err(e) => {
                rejected.push(ValidationError::at(line, format!("malformed ingestion row: {e}")));
                continue;
            }
        };
        if row.plan_id != plan.plan_id {
            rejected.push(ValidationError::at(
                line,
                format!("references plan {:?}, expected {:?}", row.plan_id, plan.plan_id),
            ));
        } else if !selected.contains(&row.source_example_id) {
            rejected.push(ValidationError::at(
                line,
                format!("source example {} is not part of plan {}", row.source_example_id, plan.plan_id),
            ));
        } else if !taken.insert(row.example_id.clone()) {
            rejected.push(ValidationError::at(line, format!("example_id {} already exists", row.example_id)));
        } else {
            accepted.push(row);
        }
    }
    IngestionReport { accepted, rejected }
}

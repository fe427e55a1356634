//! Prompt-perturbation robustness: builds perturbed prompts for an external
//! sampler, bins training examples by pre-memorization accuracy, and measures
//! how much accuracy each bin loses under each perturbation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::ManifestRow;
use crate::trajectory::{EvalRecord, ExampleId, Variant};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub tag: String,
    pub preamble_text: String,
}

impl PerturbationSpec {
    pub fn new(tag: impl Into<String>, preamble_text: impl Into<String>) -> Self {
        PerturbationSpec { tag: tag.into(), preamble_text: preamble_text.into() }
    }

    /// The two generic reasoning openers shipped as defaults.
    pub fn defaults() -> Vec<PerturbationSpec> {
        vec![
            PerturbationSpec::new("first", "First"),
            PerturbationSpec::new("we-know-that", "We know that"),
        ]
    }
}

/// One prompt an external sampler should evaluate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptRow {
    pub example_id: ExampleId,
    pub variant: Variant,
    pub query: String,
    pub forced_response_prefix: String,
}

pub fn build_perturbed_prompts(
    manifest: &[ManifestRow],
    specs: &[PerturbationSpec],
) -> Result<Vec<PromptRow>> {
    if manifest.is_empty() {
        return Err(Error::EmptyCollection("manifest"));
    }
    let mut tags = BTreeSet::new();
    for spec in specs {
        if spec.tag.is_empty() || spec.tag == Variant::ORIGINAL_TAG {
            return Err(Error::invalid("perturbation tag", format!("{:?} is reserved or empty", spec.tag)));
        }
        if spec.preamble_text.is_empty() {
            return Err(Error::invalid("perturbation preamble", format!("empty for tag {}", spec.tag)));
        }
        if !tags.insert(spec.tag.as_str()) {
            return Err(Error::Duplicate { what: "perturbation tag", key: spec.tag.clone() });
        }
    }
    let mut rows = Vec::with_capacity(manifest.len() * (specs.len() + 1));
    for row in manifest {
        rows.push(PromptRow {
            example_id: row.example_id.clone(),
            variant: Variant::Original,
            query: row.query.clone(),
            forced_response_prefix: String::new(),
        });
        for spec in specs {
            rows.push(PromptRow {
                example_id: row.example_id.clone(),
                variant: Variant::Perturbed(spec.tag.clone()),
                query: row.query.clone(),
                forced_response_prefix: spec.preamble_text.clone(),
            });
        }
    }
    rows.sort_by(|a, b| (&a.example_id, a.variant.tag()).cmp(&(&b.example_id, b.variant.tag())));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessBin {
    pub premem_lo: f64,
    pub premem_hi: f64,
    pub example_ids: BTreeSet<ExampleId>,
    pub mean_accuracy_per_variant: BTreeMap<String, f64>,
    pub accuracy_values_per_variant: BTreeMap<String, Vec<f64>>,
}

/// Equal-width bins over [0, 1]; the last bin is closed at 1.0.
pub fn bin_by_premem(premem: &BTreeMap<ExampleId, f64>, n_bins: usize) -> Result<Vec<RobustnessBin>> {
    if n_bins < 1 {
        return Err(Error::invalid("bin count", "must be at least 1"));
    }
    if premem.is_empty() {
        return Err(Error::EmptyCollection("pre-memorization accuracies"));
    }
    let edge = |i: usize| i as f64 / n_bins as f64;
    let mut bins: Vec<RobustnessBin> = (0..n_bins)
        .map(|i| RobustnessBin {
            premem_lo: edge(i),
            premem_hi: edge(i + 1),
            example_ids: BTreeSet::new(),
            mean_accuracy_per_variant: BTreeMap::new(),
            accuracy_values_per_variant: BTreeMap::new(),
        })
        .collect();
    for (id, &value) in premem {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::invalid("pre-memorization accuracy", format!("{value} for {id}")));
        }
        let mut idx = ((value * n_bins as f64).floor() as usize).min(n_bins - 1);
        // align with the stored edges so lo <= value < hi holds exactly
        while idx > 0 && value < bins[idx].premem_lo {
            idx -= 1;
        }
        while idx + 1 < n_bins && value >= bins[idx + 1].premem_lo {
            idx += 1;
        }
        bins[idx].example_ids.insert(id.clone());
    }
    Ok(bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessAnalysis {
    pub bins: Vec<RobustnessBin>,
    /// Per variant, per bin: original mean accuracy minus variant mean
    /// accuracy. `None` for bins where either mean is unavailable.
    pub degradation: BTreeMap<String, Vec<Option<f64>>>,
    pub warnings: Vec<String>,
}

pub fn degradation_stats(records: &[EvalRecord], bins: &[RobustnessBin]) -> Result<RobustnessAnalysis> {
    let binned: BTreeSet<&ExampleId> = bins.iter().flat_map(|b| b.example_ids.iter()).collect();

    let mut accuracy: BTreeMap<(&ExampleId, &str), f64> = BTreeMap::new();
    let mut variants: BTreeSet<&str> = BTreeSet::new();
    for rec in records.iter().filter(|r| binned.contains(&r.example_id)) {
        let key = (&rec.example_id, rec.variant.tag());
        if accuracy.insert(key, rec.accuracy()?).is_some() {
            return Err(Error::Duplicate {
                what: "robustness record",
                key: format!("{} {}", rec.example_id, rec.variant),
            });
        }
        variants.insert(rec.variant.tag());
    }
    variants.insert(Variant::ORIGINAL_TAG);

    let mut warnings = Vec::new();
    let mut filled = bins.to_vec();
    for bin in &mut filled {
        bin.mean_accuracy_per_variant.clear();
        bin.accuracy_values_per_variant.clear();
        for &variant in &variants {
            let mut values = Vec::new();
            for id in &bin.example_ids {
                match accuracy.get(&(id, variant)) {
                    Some(&a) => values.push(a),
                    None if variant == Variant::ORIGINAL_TAG => {
                        return Err(Error::MissingOriginal(id.to_string()))
                    }
                    None => {
                        let msg = format!("example {id} has no record for variant {variant}");
                        log::warn!("{msg}");
                        warnings.push(msg);
                    }
                }
            }
            if !values.is_empty() {
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                bin.mean_accuracy_per_variant.insert(variant.to_string(), mean);
            }
            bin.accuracy_values_per_variant.insert(variant.to_string(), values);
        }
    }

    let degradation = variants
        .iter()
        .map(|&variant| {
            let per_bin = filled
                .iter()
                .map(|bin| {
                    let original = bin.mean_accuracy_per_variant.get(Variant::ORIGINAL_TAG)?;
                    let other = bin.mean_accuracy_per_variant.get(variant)?;
                    Some(original - other)
                })
                .collect();
            (variant.to_string(), per_bin)
        })
        .collect();

    Ok(RobustnessAnalysis { bins: filled, degradation, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Split;

    fn id(s: &str) -> ExampleId {
        ExampleId::new(s).unwrap()
    }

    fn manifest(ids: &[&str]) -> Vec<ManifestRow> {
        ids.iter()
            .map(|i| ManifestRow {
                example_id: id(i),
                query: format!("question {i}"),
                target_solution: "step\nanswer".into(),
                n_solution_lines: None,
                level: None,
            })
            .collect()
    }

    fn record(example: &str, variant: Variant, n_correct: u32) -> EvalRecord {
        EvalRecord {
            run_id: "r".into(),
            epoch: 3.0,
            example_id: id(example),
            split: Split::Train,
            variant,
            n_samples: 10,
            n_correct,
            target_perplexity: None,
            greedy_loglik: None,
        }
    }

    #[test]
    fn prompt_cardinality_and_prefix() {
        let rows = build_perturbed_prompts(&manifest(&["b", "a"]), &PerturbationSpec::defaults()).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].example_id, id("a"));
        let first = rows.iter().find(|r| r.variant.tag() == "first").unwrap();
        assert_eq!(first.forced_response_prefix, "First");
        assert_eq!(first.query, "question a");
        let original = rows.iter().find(|r| r.variant == Variant::Original).unwrap();
        assert_eq!(original.forced_response_prefix, "");

        let only = build_perturbed_prompts(&manifest(&["a", "b"]), &[]).unwrap();
        assert_eq!(only.len(), 2);
        assert!(only.iter().all(|r| r.variant == Variant::Original));
    }

    #[test]
    fn prompt_spec_errors() {
        let dup = [PerturbationSpec::new("x", "A"), PerturbationSpec::new("x", "B")];
        assert!(matches!(build_perturbed_prompts(&manifest(&["a"]), &dup), Err(Error::Duplicate { .. })));
        assert!(build_perturbed_prompts(&manifest(&["a"]), &[PerturbationSpec::new("original", "A")]).is_err());
        assert!(build_perturbed_prompts(&manifest(&["a"]), &[PerturbationSpec::new("x", "")]).is_err());
        assert!(build_perturbed_prompts(&[], &[]).is_err());
    }

    #[test]
    fn binning_edges() {
        let mut m = BTreeMap::new();
        m.insert(id("low"), 0.05);
        m.insert(id("top"), 1.0);
        let bins = bin_by_premem(&m, 10).unwrap();
        assert!(bins[0].example_ids.contains(&id("low")));
        assert!(bins[9].example_ids.contains(&id("top")));
        assert_eq!(bins[9].premem_hi, 1.0);

        let mut m = BTreeMap::new();
        for (k, v) in [("a", 0.1), ("b", 0.1), ("c", 0.95), ("d", 0.5)] {
            m.insert(id(k), v);
        }
        let bins = bin_by_premem(&m, 2).unwrap();
        assert_eq!(bins[0].example_ids.len(), 2);
        assert_eq!(bins[1].example_ids.len(), 2);
        assert!(bins[1].example_ids.contains(&id("d")));
        assert!(bin_by_premem(&m, 0).is_err());
    }

    #[test]
    fn binning_respects_edges_for_decimal_values() {
        let mut m = BTreeMap::new();
        for i in 0..=100 {
            m.insert(id(&format!("e{i:03}")), i as f64 / 100.0);
        }
        for n in [3, 7, 10] {
            let bins = bin_by_premem(&m, n).unwrap();
            for (bi, bin) in bins.iter().enumerate() {
                for e in &bin.example_ids {
                    let v = m[e];
                    assert!(v >= bin.premem_lo);
                    assert!(v < bin.premem_hi || (bi == n - 1 && v <= 1.0));
                }
            }
        }
    }

    #[test]
    fn identical_variants_do_not_degrade() {
        let mut m = BTreeMap::new();
        m.insert(id("a"), 0.2);
        m.insert(id("b"), 0.9);
        let bins = bin_by_premem(&m, 2).unwrap();
        let recs = vec![
            record("a", Variant::Original, 7),
            record("a", Variant::Perturbed("first".into()), 7),
            record("b", Variant::Original, 9),
            record("b", Variant::Perturbed("first".into()), 9),
        ];
        let out = degradation_stats(&recs, &bins).unwrap();
        for per_bin in out.degradation.values() {
            assert!(per_bin.iter().all(|d| *d == Some(0.0)));
        }
    }

    #[test]
    fn single_bin_arithmetic() {
        let mut m = BTreeMap::new();
        m.insert(id("a"), 0.3);
        let bins = bin_by_premem(&m, 1).unwrap();
        let recs = vec![record("a", Variant::Original, 10), record("a", Variant::Perturbed("p".into()), 4)];
        let out = degradation_stats(&recs, &bins).unwrap();
        let d = out.degradation["p"][0].unwrap();
        assert!((d - 0.6).abs() < 1e-12);
        assert_eq!(out.degradation["original"][0], Some(0.0));
    }

    #[test]
    fn missing_variants_warn_and_missing_original_errors() {
        let mut m = BTreeMap::new();
        m.insert(id("a"), 0.3);
        m.insert(id("b"), 0.4);
        let bins = bin_by_premem(&m, 1).unwrap();
        let recs = vec![
            record("a", Variant::Original, 10),
            record("b", Variant::Original, 10),
            record("a", Variant::Perturbed("p".into()), 5),
        ];
        let out = degradation_stats(&recs, &bins).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.bins[0].accuracy_values_per_variant["p"], vec![0.5]);

        let recs = vec![record("a", Variant::Original, 10)];
        assert!(matches!(degradation_stats(&recs, &bins), Err(Error::MissingOriginal(_))));
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{numbered_lines, ValidationError};
use crate::trajectory::ExampleId;

/// One training example of a dataset manifest (one JSON object per line).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRow {
    pub example_id: ExampleId,
    pub query: String,
    pub target_solution: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_solution_lines: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
}

pub fn parse_manifest(bytes: &[u8]) -> Result<Vec<ManifestRow>, Vec<ValidationError>> {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut first_seen: BTreeMap<ExampleId, usize> = BTreeMap::new();
    for (line, text) in numbered_lines(bytes) {
        let text = match text {
            Ok(t) => t,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        let row: ManifestRow = match serde_json::from_str(text) {
            Ok(r) => r,
            Err(e) => {
                errors.push(ValidationError::at(line, format!("malformed manifest row: {e}")));
                continue;
            }
        };
        if let Some(&prev) = first_seen.get(&row.example_id) {
            errors.push(ValidationError::at(
                line,
                format!("duplicate example_id {} (first on line {prev})", row.example_id),
            ));
            continue;
        }
        if let Some(n) = row.n_solution_lines {
            let actual = row.target_solution.lines().count();
            if n as usize != actual {
                errors.push(ValidationError::at(
                    line,
                    format!("n_solution_lines {n} but target_solution has {actual} lines"),
                ));
            }
        }
        first_seen.insert(row.example_id.clone(), line);
        rows.push(row);
    }
    if rows.is_empty() && errors.is_empty() {
        errors.push(ValidationError::file("manifest has no rows"));
    }
    if errors.is_empty() {
        Ok(rows)
    } else {
        Err(errors)
    }
}

pub fn write_manifest(rows: &[ManifestRow]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("manifest rows serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_line_counts_and_duplicates() {
        let text = concat!(
            r#"{"example_id":"a","query":"q","target_solution":"x\ny","n_solution_lines":2}"#,
            "\n",
            r#"{"example_id":"b","query":"q","target_solution":"x","n_solution_lines":3}"#,
            "\n",
            r#"{"example_id":"a","query":"q","target_solution":"x"}"#,
            "\n"
        );
        let errs = parse_manifest(text.as_bytes()).unwrap_err();
        assert_eq!(errs.len(), 2);
        assert_eq!(errs[0].line, Some(2));
        assert_eq!(errs[1].line, Some(3));
    }

    #[test]
    fn round_trips() {
        let text = concat!(
            r#"{"example_id":"a","query":"q","target_solution":"x\ny","n_solution_lines":2}"#,
            "\n",
            r#"{"example_id":"b","query":"q2","target_solution":"z","level":3}"#,
            "\n"
        );
        let rows = parse_manifest(text.as_bytes()).unwrap();
        assert_eq!(write_manifest(&rows), text);
    }
}

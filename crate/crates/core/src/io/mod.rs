//! File formats: evaluation logs, dataset manifests, weight/gradient vector
//! exports, curation plans, plus report tables and figures.

mod log;
mod manifest;
mod plan;
pub mod svg;
mod table;
mod vector;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use self::log::{
    validate, validate_bytes, write_log, LogHeader, RunData, TestRecord, ValidatedLog, LOG_SCHEMA, LOG_VERSION,
};
pub use self::manifest::{parse_manifest, write_manifest, ManifestRow};
pub use self::plan::{ingest, parse_plan, write_plan, IngestedExample, IngestionReport, PlanHeader, PlanWeight};
pub use self::table::{format_number, Cell, Precision, Table};
pub use self::vector::{parse_vector, write_vector};

/// One problem found in an input file. `line` is 1-based; `None` for
/// problems that concern the file as a whole.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValidationError {
    pub line: Option<usize>,
    pub message: String,
}

impl ValidationError {
    pub fn at(line: usize, message: impl Into<String>) -> Self {
        ValidationError { line: Some(line), message: message.into() }
    }

    pub fn file(message: impl Into<String>) -> Self {
        ValidationError { line: None, message: message.into() }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Splits raw bytes into 1-based numbered lines, tolerating a final newline
/// and CRLF endings. Invalid UTF-8 is reported per line.
pub(crate) fn numbered_lines(bytes: &[u8]) -> Vec<(usize, std::result::Result<&str, ValidationError>)> {
    let mut chunks: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    if chunks.last().is_some_and(|c| c.is_empty()) {
        chunks.pop();
    }
    chunks
        .into_iter()
        .enumerate()
        .map(|(i, raw)| {
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            let line = i + 1;
            (line, std::str::from_utf8(raw).map_err(|_| ValidationError::at(line, "invalid UTF-8")))
        })
        .collect()
}

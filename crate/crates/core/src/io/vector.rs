//! Flat numeric vector export: a header line holding the element count,
//! then one decimal value per line.

use crate::baselines::NumericVector;
use crate::error::{Error, Result};

use super::numbered_lines;

pub fn parse_vector(label: &str, bytes: &[u8]) -> Result<NumericVector> {
    let lines = numbered_lines(bytes);
    let mut iter = lines.into_iter();
    let (_, header) = iter.next().ok_or(Error::Parse { line: 1, message: "missing element count".into() })?;
    let header = header.map_err(|e| Error::Parse { line: 1, message: e.message })?;
    let count: usize = header
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line: 1, message: format!("bad element count {header:?}") })?;
    let mut values = Vec::with_capacity(count);
    for (line, text) in iter {
        let text = text.map_err(|e| Error::Parse { line, message: e.message })?;
        let v: f64 = text
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("bad value {text:?}") })?;
        if !v.is_finite() {
            return Err(Error::Parse { line, message: format!("non-finite value {text:?}") });
        }
        values.push(v);
    }
    if values.len() != count {
        return Err(Error::LengthMismatch { expected: count, found: values.len() });
    }
    NumericVector::new(label, values)
}

pub fn write_vector(v: &NumericVector) -> String {
    let mut out = format!("{}\n", v.len());
    for x in v.values() {
        out.push_str(&format!("{x:?}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let v = parse_vector("w", b"3\n0.5\n-1\n2e-3\n").unwrap();
        assert_eq!(v.values(), &[0.5, -1.0, 0.002]);
        let again = parse_vector("w", write_vector(&v).as_bytes()).unwrap();
        assert_eq!(again, v);
    }

    #[test]
    fn reports_bad_lines() {
        assert!(matches!(parse_vector("w", b"2\n0.5\nabc\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_vector("w", b"3\n0.5\n1\n"), Err(Error::LengthMismatch { .. })));
        assert!(parse_vector("w", b"").is_err());
        assert!(parse_vector("w", b"1\nNaN\n").is_err());
    }
}

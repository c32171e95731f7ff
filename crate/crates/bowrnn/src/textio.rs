//! Helpers for the text file formats: round-trip float formatting and
//! line-oriented parsing with useful error messages.

use crate::error::{Error, Result};
use std::fmt::Write as _;

/// Format a float with 17 significant digits so that parsing it back
/// recovers the exact same f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Append a space-separated row of floats to `out`, 17 significant digits each.
pub fn push_row(out: &mut String, row: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for x in row {
        if !first {
            out.push(' ');
        }
        let _ = write!(out, "{x:.16e}");
        first = false;
    }
    out.push('\n');
}

/// Parse a whitespace-separated row of floats, checking the expected count.
pub fn parse_row(line: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad float {tok:?} in {what}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::Format(format!(
            "{what}: expected {expected} values, got {}",
            values.len()
        )));
    }
    Ok(values)
}

/// Pull the next line or fail with a message naming what was expected.
pub fn next_line<'a>(lines: &mut impl Iterator<Item = &'a str>, what: &str) -> Result<&'a str> {
    lines
        .next()
        .ok_or_else(|| Error::Format(format!("unexpected end of file, expected {what}")))
}

/// Parse a non-negative integer field.
pub fn parse_usize(tok: &str, what: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::Format(format!("bad integer {tok:?} for {what}")))
}

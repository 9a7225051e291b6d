//! CSV emission and ingestion.
//!
//! Floats are written with 12 significant digits (`%.12g` style, `.` as the
//! decimal separator) so that equal runs produce byte-equal files.

use std::path::Path;

use crate::error::{CliError, Result};

/// Formats a float with 12 significant digits, trailing zeros removed.
/// Scientific notation is used below `1e-4` and from `1e12` on.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        format!("{}e{exp}", trim_zeros(mantissa))
    } else {
        let decimals = (11 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Renders a header and rows as CSV text with `\n` line endings.
pub fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("utf-8 input")
}

/// One data row with its 1-based line number in the source file.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub line: u64,
    pub fields: Vec<String>,
}

impl Row {
    pub fn get<T: std::str::FromStr>(&self, path: &Path, index: usize, name: &str) -> Result<T> {
        let raw = &self.fields[index];
        raw.trim().parse().map_err(|_| CliError::Csv {
            path: path.into(),
            line: self.line,
            message: format!("column `{name}`: cannot parse `{raw}`"),
        })
    }
}

/// Parses CSV text whose header must start with `required`; at most
/// `optional` further named columns may follow.
pub fn parse(text: &str, path: &Path, required: &[&str], optional: &[&str]) -> Result<Vec<Row>> {
    let csv_err = |line: u64, message: String| CliError::Csv {
        path: path.into(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| csv_err(1, e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let expected_prefix = names.len() >= required.len() && names[..required.len()] == *required;
    let extras_ok = names[required.len().min(names.len())..]
        .iter()
        .zip(optional)
        .all(|(a, b)| a == b)
        && names.len() <= required.len() + optional.len();
    if !expected_prefix || !extras_ok {
        return Err(csv_err(
            1,
            format!(
                "expected header `{}`, got `{}`",
                required.join(","),
                names.join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            let message = match e.kind() {
                csv::ErrorKind::UnequalLengths {
                    expected_len, len, ..
                } => {
                    format!("expected {expected_len} fields, found {len}")
                }
                _ => e.to_string(),
            };
            csv_err(line, message)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push(Row {
            line,
            fields: record.iter().map(str::to_string).collect(),
        });
    }
    Ok(rows)
}

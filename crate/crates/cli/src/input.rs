//! CSV ingestion: rows are time points, columns are coordinates.

use std::fmt;
use std::path::Path;

use covchange::Series;

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: u64,
    /// 1-based field index; 0 when the whole record is at fault.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.column == 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
        }
    }
}

fn whole(line: u64, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column: 0,
        message: message.into(),
    }
}

fn parse_field(raw: &str) -> Result<f64, String> {
    let s = raw.trim();
    if s.is_empty() {
        return Err("missing value".into());
    }
    // Rust also accepts "inf" and "NaN"; only plain decimal numbers are data.
    if !s
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
    {
        return Err(format!("not a number: {s:?}"));
    }
    s.parse::<f64>().map_err(|_| format!("not a number: {s:?}"))
}

/// Parses CSV text. A first row with any non-numeric field is a header.
pub fn parse_csv(text: &str) -> Result<Series, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            whole(line, e.to_string())
        })?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        let parsed: Vec<Result<f64, String>> = record.iter().map(parse_field).collect();
        if k == 0 && parsed.iter().any(|r| r.is_err()) && record.iter().all(|f| !f.trim().is_empty()) {
            width = Some(record.len());
            continue;
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(whole(line, format!("expected {w} fields, found {}", record.len())));
            }
            None => width = Some(record.len()),
            _ => {}
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (j, r) in parsed.into_iter().enumerate() {
            row.push(r.map_err(|message| ParseError {
                line,
                column: j + 1,
                message,
            })?);
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(whole(0, format!("need at least 2 data rows, found {}", rows.len())));
    }
    Series::from_rows(&rows).map_err(|e| whole(0, e.to_string()))
}

pub fn read_csv(path: &Path) -> Result<Series, ParseError> {
    let text = std::fs::read_to_string(path).map_err(|e| whole(0, format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text)
}

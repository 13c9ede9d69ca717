//! Tolerant parsing of model completions into raw table rows.
//!
//! Completions are supposed to be bare `Compound, SampleId, weight, units`
//! tables, but real output arrives wrapped in code fences, pipe-delimited
//! markdown, prose apologies, or with trailing commas. Parsing never fails:
//! every line either becomes a [`RawRecord`] or is accounted for by a
//! [`ParseIssue`].

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::interval::{Interval, IntervalError};

/// Where a parsed row (or skipped line) came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowProvenance {
    pub doc_id: String,
    pub chunk_index: usize,
    /// 1-based line number within the completion; 0 for whole-completion
    /// issues such as an empty table.
    pub line: usize,
}

/// One table row exactly as the model emitted it, trimmed of surrounding
/// whitespace only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub compound_raw: String,
    pub sample_raw: String,
    pub weight_raw: String,
    pub unit_raw: String,
    /// Fields past the fourth, kept as an annotation and ignored by joins.
    pub extras: Vec<String>,
    pub provenance: RowProvenance,
}

impl RawRecord {
    /// Renders the record back to a comma-separated row. Feeding the result
    /// through [`parse_completion`] yields an equal record (provenance aside).
    pub fn to_csv_row(&self) -> String {
        let mut fields = Vec::with_capacity(4 + self.extras.len());
        fields.push(self.compound_raw.as_str());
        fields.push(self.sample_raw.as_str());
        fields.push(self.weight_raw.as_str());
        fields.push(self.unit_raw.as_str());
        fields.extend(self.extras.iter().map(String::as_str));
        fields.join(", ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseIssueKind {
    /// Delimited line with too few or empty core fields.
    MalformedRow,
    /// Line with no table structure at all (prose, refusals, ...).
    UnknownStructure,
    /// Completion contained no data-bearing lines.
    EmptyTable,
}

impl ParseIssueKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ParseIssueKind::MalformedRow => "malformed-row",
            ParseIssueKind::UnknownStructure => "unknown-structure",
            ParseIssueKind::EmptyTable => "empty-table",
        }
    }
}

/// A line the parser skipped, kept for audit. Every skipped data-bearing
/// line yields exactly one issue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseIssue {
    pub provenance: RowProvenance,
    pub line_text: String,
    pub kind: ParseIssueKind,
}

/// Parses a completion into records and issues. Total: any input string is
/// handled. Structural lines (code fences, markdown separators, the header
/// row, blank lines) are stripped silently; every other line becomes either
/// a record or an issue. A completion with no data-bearing lines at all
/// yields a single [`ParseIssueKind::EmptyTable`] issue with line 0.
pub fn parse_completion(
    text: &str,
    doc_id: &str,
    chunk_index: usize,
) -> (Vec<RawRecord>, Vec<ParseIssue>) {
    let mut records = Vec::new();
    let mut issues = Vec::new();
    let mut saw_data_line = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || is_code_fence(line) || is_markdown_separator(line) {
            continue;
        }
        let cells = split_cells(line);
        if is_header(&cells) {
            continue;
        }
        saw_data_line = true;
        let provenance = RowProvenance {
            doc_id: doc_id.to_string(),
            chunk_index,
            line: idx + 1,
        };
        if cells.len() >= 4 && cells.iter().take(4).all(|c| !c.is_empty()) {
            records.push(RawRecord {
                compound_raw: cells[0].to_string(),
                sample_raw: cells[1].to_string(),
                weight_raw: cells[2].to_string(),
                unit_raw: cells[3].to_string(),
                extras: cells[4..].iter().map(|c| c.to_string()).collect(),
                provenance,
            });
        } else if cells.len() >= 2 {
            issues.push(ParseIssue {
                provenance,
                line_text: line.to_string(),
                kind: ParseIssueKind::MalformedRow,
            });
        } else {
            issues.push(ParseIssue {
                provenance,
                line_text: line.to_string(),
                kind: ParseIssueKind::UnknownStructure,
            });
        }
    }

    if !saw_data_line {
        issues.push(ParseIssue {
            provenance: RowProvenance {
                doc_id: doc_id.to_string(),
                chunk_index,
                line: 0,
            },
            line_text: String::new(),
            kind: ParseIssueKind::EmptyTable,
        });
    }

    (records, issues)
}

fn is_code_fence(line: &str) -> bool {
    line.starts_with("```") || line.starts_with("~~~")
}

/// Markdown table separators like `|---|---|` or `--- | ---`.
fn is_markdown_separator(line: &str) -> bool {
    line.contains('-') && line.chars().all(|c| matches!(c, '-' | '|' | ':' | ' ' | '\t'))
}

/// Splits on pipes for markdown rows, otherwise on commas. Trailing empty
/// cells (from trailing delimiters) are dropped.
fn split_cells(line: &str) -> Vec<&str> {
    let mut cells: Vec<&str> = if line.starts_with('|') || (line.contains('|') && !line.contains(','))
    {
        line.trim_matches('|').split('|').map(str::trim).collect()
    } else {
        line.split(',').map(str::trim).collect()
    };
    while cells.last() == Some(&"") {
        cells.pop();
    }
    cells
}

fn is_header(cells: &[&str]) -> bool {
    if cells.len() < 4 {
        return false;
    }
    let norm = |s: &str| -> String {
        s.chars()
            .filter(|c| !matches!(c, ' ' | '_' | '.'))
            .map(|c| c.to_ascii_lowercase())
            .collect()
    };
    norm(cells[0]) == "compound"
        && norm(cells[1]) == "sampleid"
        && matches!(norm(cells[2]).as_str(), "weight" | "weights")
        && matches!(norm(cells[3]).as_str(), "unit" | "units")
}

/// Weight field parsed into an interval plus the repairs applied on the way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsedWeight {
    pub interval: Interval,
    /// A single value was reported instead of a range.
    pub single_value: bool,
    /// Bounds arrived in `b-a` order and were swapped.
    pub swapped_bounds: bool,
    /// An upper-bound inequality like `<0.1`, read as `[0, 0.1]`.
    pub inequality: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeightParseError {
    #[error("empty weight field")]
    Empty,
    #[error("weight {0:?} is not a nonnegative decimal or range")]
    NotNumeric(String),
    #[error("weight {0:?} contains a negative value")]
    Negative(String),
}

/// Parses a weight field: `a-b` becomes `[a, b]` (swapped if reversed), a
/// single decimal `v` becomes the degenerate `[v, v]`, and `<v` becomes
/// `[0, v]`. Within weights, `-` is always a range separator, never a sign:
/// abundances are nonnegative.
pub fn parse_weight(raw: &str) -> Result<ParsedWeight, WeightParseError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(WeightParseError::Empty);
    }

    for prefix in ["<=", "\u{2264}", "<"] {
        if let Some(rest) = trimmed.strip_prefix(prefix) {
            let bound = parse_value(rest, raw)?;
            let interval =
                Interval::new(0.0, bound).map_err(|_| WeightParseError::Negative(raw.to_string()))?;
            return Ok(ParsedWeight {
                interval,
                single_value: false,
                swapped_bounds: false,
                inequality: true,
            });
        }
    }

    // Whole-field parse first so scientific notation ("1.2e-3") is not
    // mistaken for a range.
    if let Some(value) = try_parse_value(trimmed) {
        require_nonnegative(value, raw)?;
        return Ok(ParsedWeight {
            interval: interval_from(value, value, raw)?,
            single_value: true,
            swapped_bounds: false,
            inequality: false,
        });
    }

    let parts: Vec<&str> = trimmed
        .split(['-', '\u{2013}'])
        .map(str::trim)
        .collect();
    if parts.len() == 2 && !parts[0].is_empty() && !parts[1].is_empty() {
        let a = parse_value(parts[0], raw)?;
        let b = parse_value(parts[1], raw)?;
        let (lo, hi, swapped) = if a <= b { (a, b, false) } else { (b, a, true) };
        return Ok(ParsedWeight {
            interval: interval_from(lo, hi, raw)?,
            single_value: false,
            swapped_bounds: swapped,
            inequality: false,
        });
    }

    Err(WeightParseError::NotNumeric(raw.to_string()))
}

fn try_parse_value(text: &str) -> Option<f64> {
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_value(text: &str, raw: &str) -> Result<f64, WeightParseError> {
    let value =
        try_parse_value(text.trim()).ok_or_else(|| WeightParseError::NotNumeric(raw.to_string()))?;
    require_nonnegative(value, raw)?;
    Ok(value)
}

fn require_nonnegative(value: f64, raw: &str) -> Result<(), WeightParseError> {
    if value < 0.0 {
        return Err(WeightParseError::Negative(raw.to_string()));
    }
    Ok(())
}

fn interval_from(lo: f64, hi: f64, raw: &str) -> Result<Interval, WeightParseError> {
    Interval::new(lo, hi).map_err(|err| match err {
        IntervalError::NonFinite { .. } | IntervalError::Inverted { .. } => {
            WeightParseError::NotNumeric(raw.to_string())
        }
    })
}

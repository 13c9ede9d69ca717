//! Stable on-disk formats: records, ground truth, metrics, the recall
//! matrix, summaries, and analytics. CSV layouts are documented in the
//! README; JSON mirrors carry the same data with full structure.
//!
//! Writers emit rows in the deterministic orders the core stages produce,
//! so identical inputs yield byte-identical files.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use regolith_core::analytics::{FrequencyReport, IntervalDistribution};
use regolith_core::evaluate::{GroundTruthEntry, GroupSummary, MetricRow, RecallMatrix};
use regolith_core::interval::Interval;
use regolith_core::normalize::{
    normalize_unit, CompositionRecord, RepairFlag, SourceRef,
};
use regolith_core::RecordKey;

use crate::error::{AppError, AppResult};

pub const RECORDS_CSV_HEADER: &str = "compound,sample_id,lo,hi,unit,flags,provenance";
pub const TRUTH_CSV_HEADER: &str = "compound,sample_id,lo,hi,unit";
pub const METRICS_CSV_HEADER: &str =
    "sample_id,compound,unit,abs_err,rel_err,rel_err_flag,precision,recall";

fn read(path: &Path) -> AppResult<String> {
    fs::read_to_string(path)
        .map_err(|err| AppError::input(format!("cannot read {}: {err}", path.display())))
}

fn write(path: &Path, content: &str) -> AppResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|err| AppError::input(format!("cannot create {}: {err}", parent.display())))?;
    }
    fs::write(path, content)
        .map_err(|err| AppError::input(format!("cannot write {}: {err}", path.display())))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|err| AppError::input(format!("cannot serialize {}: {err}", path.display())))?;
    text.push('\n');
    write(path, &text)
}

/// Splits a CSV line. Fields in these formats never contain commas or
/// quotes; anything else is a format error at a higher level.
fn split_line(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn parse_bound(field: &str, name: &str, path: &Path, line_no: usize) -> AppResult<f64> {
    field.parse::<f64>().map_err(|_| {
        AppError::input(format!(
            "{}:{line_no}: {name} {field:?} is not a number",
            path.display()
        ))
    })
}

// ---- normalized records -------------------------------------------------

pub fn records_to_csv(records: &[CompositionRecord]) -> String {
    let mut out = String::from(RECORDS_CSV_HEADER);
    out.push('\n');
    for record in records {
        let flags: Vec<&str> = record.flags.iter().map(|f| f.as_str()).collect();
        let provenance: Vec<String> = record
            .provenance
            .iter()
            .map(|s| format!("{}:{}", s.doc_id, s.chunk_index))
            .collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            record.compound,
            record.sample_id,
            record.interval.lo(),
            record.interval.hi(),
            record.unit,
            flags.join("|"),
            provenance.join(";"),
        ));
    }
    out
}

pub fn write_records_csv(path: &Path, records: &[CompositionRecord]) -> AppResult<()> {
    write(path, &records_to_csv(records))
}

pub fn read_records_csv(path: &Path) -> AppResult<Vec<CompositionRecord>> {
    let content = read(path)?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == RECORDS_CSV_HEADER => {}
        other => {
            return Err(AppError::input(format!(
                "{}: expected header {RECORDS_CSV_HEADER:?}, found {:?}",
                path.display(),
                other.map(|(_, h)| h).unwrap_or_default()
            )))
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_line(line);
        if fields.len() != 7 {
            return Err(AppError::input(format!(
                "{}:{line_no}: expected 7 fields, found {}",
                path.display(),
                fields.len()
            )));
        }
        let lo = parse_bound(fields[2], "lo", path, line_no)?;
        let hi = parse_bound(fields[3], "hi", path, line_no)?;
        let interval = Interval::new(lo, hi)
            .map_err(|err| AppError::input(format!("{}:{line_no}: {err}", path.display())))?;
        let unit = normalize_unit(fields[4])
            .map_err(|err| AppError::input(format!("{}:{line_no}: {err}", path.display())))?;
        let mut flags = BTreeSet::new();
        for flag in fields[5].split('|').filter(|f| !f.is_empty()) {
            flags.insert(RepairFlag::parse(flag).ok_or_else(|| {
                AppError::input(format!(
                    "{}:{line_no}: unknown flag {flag:?}",
                    path.display()
                ))
            })?);
        }
        let mut provenance = Vec::new();
        for source in fields[6].split(';').filter(|s| !s.is_empty()) {
            let (doc_id, chunk) = source.rsplit_once(':').ok_or_else(|| {
                AppError::input(format!(
                    "{}:{line_no}: provenance {source:?} is not doc:chunk",
                    path.display()
                ))
            })?;
            let chunk_index = chunk.parse::<usize>().map_err(|_| {
                AppError::input(format!(
                    "{}:{line_no}: chunk index {chunk:?} is not an integer",
                    path.display()
                ))
            })?;
            provenance.push(SourceRef {
                doc_id: doc_id.to_owned(),
                chunk_index,
            });
        }
        if provenance.is_empty() {
            return Err(AppError::input(format!(
                "{}:{line_no}: record has no provenance",
                path.display()
            )));
        }
        if fields[1].is_empty() || !fields[1].chars().all(|c| c.is_ascii_digit()) {
            return Err(AppError::input(format!(
                "{}:{line_no}: sample id {:?} must be digits only",
                path.display(),
                fields[1]
            )));
        }
        records.push(CompositionRecord {
            compound: fields[0].to_owned(),
            sample_id: fields[1].to_owned(),
            interval,
            unit,
            provenance,
            flags,
        });
    }
    Ok(records)
}

// ---- ground truth -------------------------------------------------------

/// Loads and validates ground truth. Duplicate (sample, compound, unit)
/// keys and inverted intervals are load errors, named by key or line.
pub fn load_ground_truth(path: &Path) -> AppResult<Vec<GroundTruthEntry>> {
    let content = read(path)?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == TRUTH_CSV_HEADER => {}
        other => {
            return Err(AppError::input(format!(
                "{}: expected header {TRUTH_CSV_HEADER:?}, found {:?}",
                path.display(),
                other.map(|(_, h)| h).unwrap_or_default()
            )))
        }
    }
    let mut entries: Vec<GroundTruthEntry> = Vec::new();
    let mut seen: BTreeSet<RecordKey> = BTreeSet::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_line(line);
        if fields.len() != 5 {
            return Err(AppError::input(format!(
                "{}:{line_no}: expected 5 fields, found {}",
                path.display(),
                fields.len()
            )));
        }
        let lo = parse_bound(fields[2], "lo", path, line_no)?;
        let hi = parse_bound(fields[3], "hi", path, line_no)?;
        let interval = Interval::new(lo, hi)
            .map_err(|err| AppError::input(format!("{}:{line_no}: {err}", path.display())))?;
        let unit = normalize_unit(fields[4])
            .map_err(|err| AppError::input(format!("{}:{line_no}: {err}", path.display())))?;
        let entry = GroundTruthEntry::new(fields[0], fields[1], interval, unit)
            .map_err(|err| AppError::input(format!("{}:{line_no}: {err}", path.display())))?;
        if !seen.insert(entry.key()) {
            return Err(AppError::input(format!(
                "{}:{line_no}: duplicate ground-truth key {}",
                path.display(),
                entry.key()
            )));
        }
        entries.push(entry);
    }
    Ok(entries)
}

// ---- metrics ------------------------------------------------------------

pub fn metrics_to_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.key.sample_id,
            row.key.compound,
            row.key.unit,
            row.midpoint_abs_err,
            row.midpoint_rel_err
                .map(|v| v.to_string())
                .unwrap_or_default(),
            row.rel_err_flagged,
            row.precision,
            row.recall,
        ));
    }
    out
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> AppResult<()> {
    write(path, &metrics_to_csv(rows))
}

/// Reads metric rows back (for plotting). Empty rel_err cells become `None`.
pub fn read_metrics_csv(path: &Path) -> AppResult<Vec<MetricRow>> {
    let content = read(path)?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == METRICS_CSV_HEADER => {}
        other => {
            return Err(AppError::input(format!(
                "{}: expected header {METRICS_CSV_HEADER:?}, found {:?}",
                path.display(),
                other.map(|(_, h)| h).unwrap_or_default()
            )))
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_line(line);
        if fields.len() != 8 {
            return Err(AppError::input(format!(
                "{}:{line_no}: expected 8 fields, found {}",
                path.display(),
                fields.len()
            )));
        }
        let unit = normalize_unit(fields[2])
            .map_err(|err| AppError::input(format!("{}:{line_no}: {err}", path.display())))?;
        let rel_err = if fields[4].is_empty() {
            None
        } else {
            Some(parse_bound(fields[4], "rel_err", path, line_no)?)
        };
        rows.push(MetricRow {
            key: RecordKey::new(fields[0], fields[1], unit),
            midpoint_abs_err: parse_bound(fields[3], "abs_err", path, line_no)?,
            midpoint_rel_err: rel_err,
            rel_err_flagged: fields[5] == "true",
            precision: parse_bound(fields[6], "precision", path, line_no)?,
            recall: parse_bound(fields[7], "recall", path, line_no)?,
        });
    }
    Ok(rows)
}

// ---- recall matrix ------------------------------------------------------

pub fn recall_matrix_to_csv(matrix: &RecallMatrix) -> String {
    let mut out = String::from("compound");
    for sample in &matrix.sample_ids {
        out.push(',');
        out.push_str(sample);
    }
    out.push('\n');
    for (row_idx, compound) in matrix.compounds.iter().enumerate() {
        out.push_str(compound);
        for cell in &matrix.cells[row_idx] {
            out.push(',');
            out.push_str(cell.as_str());
        }
        out.push('\n');
    }
    out
}

pub fn write_recall_matrix_csv(path: &Path, matrix: &RecallMatrix) -> AppResult<()> {
    write(path, &recall_matrix_to_csv(matrix))
}

// ---- summaries ----------------------------------------------------------

pub fn summaries_to_csv(summaries: &[(String, Vec<GroupSummary>)]) -> String {
    let mut out =
        String::from("group_by,group,metric,n,min,q1,median,q3,max,outliers\n");
    for (group_by, rows) in summaries {
        for summary in rows {
            let outliers: Vec<String> =
                summary.dist.outliers.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                group_by,
                summary.group,
                summary.metric.as_str(),
                summary.dist.n,
                summary.dist.min,
                summary.dist.q1,
                summary.dist.median,
                summary.dist.q3,
                summary.dist.max,
                outliers.join("|"),
            ));
        }
    }
    out
}

// ---- analytics ----------------------------------------------------------

#[derive(serde::Serialize)]
pub struct AnalyticsReport {
    #[serde(flatten)]
    pub frequencies: FrequencyReport,
    pub distributions: std::collections::BTreeMap<String, IntervalDistribution>,
}

pub fn distribution_to_csv(dist: &IntervalDistribution) -> String {
    let mut out = String::from("sample_id,lo,hi,length\n");
    for entry in &dist.entries {
        out.push_str(&format!(
            "{},{},{},{}\n",
            entry.sample_id,
            entry.interval.lo(),
            entry.interval.hi(),
            entry.interval.length(),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use regolith_core::normalize::Unit;

    use super::*;

    fn sample_records() -> Vec<CompositionRecord> {
        vec![
            CompositionRecord {
                compound: "FeO".into(),
                sample_id: "15415".into(),
                interval: Interval::new(0.08, 0.202).unwrap(),
                unit: Unit::Percent,
                provenance: vec![
                    SourceRef {
                        doc_id: "15415".into(),
                        chunk_index: 0,
                    },
                    SourceRef {
                        doc_id: "15415".into(),
                        chunk_index: 2,
                    },
                ],
                flags: BTreeSet::from([RepairFlag::SingleValueRepaired]),
            },
            CompositionRecord {
                compound: "Cr".into(),
                sample_id: "15535".into(),
                interval: Interval::new(3900.0, 5094.0).unwrap(),
                unit: Unit::Ppm,
                provenance: vec![SourceRef {
                    doc_id: "15535".into(),
                    chunk_index: 1,
                }],
                flags: BTreeSet::new(),
            },
        ]
    }

    #[test]
    fn records_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let records = sample_records();
        write_records_csv(&path, &records).unwrap();
        let reread = read_records_csv(&path).unwrap();
        assert_eq!(reread, records);
    }

    #[test]
    fn records_csv_layout_is_stable() {
        let csv = records_to_csv(&sample_records());
        let expected = "compound,sample_id,lo,hi,unit,flags,provenance\n\
            FeO,15415,0.08,0.202,percent,single-value-repaired,15415:0;15415:2\n\
            Cr,15535,3900,5094,ppm,,15535:1\n";
        assert_eq!(csv, expected);
    }

    #[test]
    fn truth_loads_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        fs::write(
            &path,
            "compound,sample_id,lo,hi,unit\nFeO,15415,0.199,0.202,percent\n",
        )
        .unwrap();
        let entries = load_ground_truth(&path).unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].compound, "FeO");
        assert_eq!(entries[0].interval.lo(), 0.199);

        fs::write(
            &path,
            "compound,sample_id,lo,hi,unit\nFeO,15415,0.199,0.202,percent\nFeO,15415,0.1,0.2,percent\n",
        )
        .unwrap();
        let err = load_ground_truth(&path).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
        assert!(err.contains("15415/FeO/percent"), "{err}");

        fs::write(
            &path,
            "compound,sample_id,lo,hi,unit\nFeO,15415,0.3,0.2,percent\n",
        )
        .unwrap();
        let err = load_ground_truth(&path).unwrap_err().to_string();
        assert!(err.contains(":2:"), "error should carry the line: {err}");
    }

    #[test]
    fn truth_rejects_malformed_rows_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        fs::write(
            &path,
            "compound,sample_id,lo,hi,unit\nFeO,15415,abc,0.202,percent\n",
        )
        .unwrap();
        let err = load_ground_truth(&path).unwrap_err().to_string();
        assert!(err.contains(":2:") && err.contains("abc"), "{err}");
    }

    #[test]
    fn metrics_csv_round_trips() {
        let rows = vec![MetricRow {
            key: RecordKey::new("15415", "FeO", Unit::Percent),
            midpoint_abs_err: 0.0595,
            midpoint_rel_err: Some(29.675810473815463),
            rel_err_flagged: true,
            precision: 0.024590163934426233,
            recall: 1.0,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_metrics_csv(&path, &rows).unwrap();
        let reread = read_metrics_csv(&path).unwrap();
        assert_eq!(reread, rows);
    }

    #[test]
    fn matrix_csv_layout() {
        let matrix = RecallMatrix {
            compounds: vec!["FeO".into()],
            sample_ids: vec!["15415".into(), "61016".into()],
            cells: vec![vec![
                regolith_core::evaluate::CellState::Provided,
                regolith_core::evaluate::CellState::Missed,
            ]],
        };
        assert_eq!(
            recall_matrix_to_csv(&matrix),
            "compound,15415,61016\nFeO,provided,missed\n"
        );
    }
}

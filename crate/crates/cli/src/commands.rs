//! The four pipeline commands: extract, evaluate, analyze, plot.

use std::collections::BTreeMap;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use regolith_core::analytics::{compound_frequencies, interval_distribution};
use regolith_core::chunk::{chunk_document, DocumentText};
use regolith_core::evaluate::{
    compute_metrics, join_records, recall_matrix, summarize, GroupBy, GroupSummary, MatchKind,
    MatchResult, MetricKind, MetricOptions, MetricRow,
};
use regolith_core::normalize::{
    dedupe_and_merge, normalize_records, CompositionRecord, MergeOptions, NormalizeIssue, Unit,
};
use regolith_core::parse::{parse_completion, ParseIssue, RawRecord};
use regolith_core::prompt::PromptBuilder;

use crate::error::{AppError, AppResult};
use crate::formats;
use crate::gateway::{Gateway, GatewayError};
use crate::ingest::load_corpus;
use crate::manifest::{DocumentFailure, DocumentStats, RunManifest};
use crate::plot::{self, IntervalSeries};

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub corpus_dir: PathBuf,
    pub out_dir: PathBuf,
    pub chunk_chars: usize,
    pub page_delimiter: char,
    pub model: String,
    pub temperature: f64,
    pub standalone: bool,
    pub jobs: usize,
    pub wide_merge_multiple: f64,
}

pub struct ExtractReport {
    pub records: Vec<CompositionRecord>,
    pub manifest: RunManifest,
    pub records_csv: PathBuf,
    pub records_json: PathBuf,
    pub manifest_path: PathBuf,
}

struct DocumentOutcome {
    doc_id: String,
    chunks: usize,
    raw_records: Vec<RawRecord>,
    parse_issues: Vec<ParseIssue>,
}

/// What kind of problem sank a document, for exit-code classification
/// when the whole run fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FailureClass {
    Config,
    Endpoint,
}

/// Runs ingest -> chunk -> prompt -> complete -> parse -> normalize and
/// writes records plus the run manifest. Per-document failures are recorded
/// in the manifest; the command fails only when zero documents succeed.
pub fn run_extract(options: &ExtractOptions, gateway: &Gateway) -> AppResult<ExtractReport> {
    let chunk_chars = NonZeroUsize::new(options.chunk_chars)
        .ok_or_else(|| AppError::config("--chunk-chars must be at least 1"))?;
    let builder = PromptBuilder::new(options.model.clone(), options.temperature)
        .map_err(|err| AppError::config(err.to_string()))?;

    let corpus = load_corpus(&options.corpus_dir, options.page_delimiter)?;
    if corpus.documents.is_empty() {
        let reasons: Vec<String> = corpus
            .issues
            .iter()
            .map(|i| format!("{}: {}", i.path.display(), i.message))
            .collect();
        return Err(AppError::input(format!(
            "no documents could be loaded from {}: {}",
            options.corpus_dir.display(),
            reasons.join("; ")
        )));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|err| AppError::config(format!("cannot build worker pool: {err}")))?;

    let outcomes: Vec<Result<DocumentOutcome, (DocumentFailure, FailureClass)>> =
        pool.install(|| {
            corpus
                .documents
                .par_iter()
                .map(|doc| extract_document(doc, &builder, gateway, chunk_chars, options.standalone))
                .collect()
        });

    let mut documents = Vec::new();
    let mut failures = Vec::new();
    let mut any_config_failure = false;
    let mut raw_records: Vec<RawRecord> = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(done) => {
                for issue in &done.parse_issues {
                    log::debug!(
                        "parse issue [{}] {}#{} line {}: {:?}",
                        issue.kind.as_str(),
                        issue.provenance.doc_id,
                        issue.provenance.chunk_index,
                        issue.provenance.line,
                        issue.line_text
                    );
                }
                raw_records.extend(done.raw_records.iter().cloned());
                documents.push(done);
            }
            Err((failure, class)) => {
                any_config_failure |= class == FailureClass::Config;
                failures.push(failure);
            }
        }
    }

    if documents.is_empty() {
        let summary: Vec<String> = failures
            .iter()
            .map(|f| format!("{}: {}", f.doc_id, f.error))
            .collect();
        let message = format!("every document failed: {}", summary.join("; "));
        return Err(if any_config_failure {
            AppError::config(message)
        } else {
            AppError::endpoint(message)
        });
    }

    let outcome = normalize_records(&raw_records);
    let mut normalize_issue_counts: BTreeMap<String, usize> = BTreeMap::new();
    for issue in &outcome.issues {
        *normalize_issue_counts
            .entry(issue.provenance.doc_id.clone())
            .or_insert(0) += 1;
    }
    log_normalize_issues(&outcome.issues);
    let records = dedupe_and_merge(
        outcome.records,
        &MergeOptions {
            wide_merge_multiple: options.wide_merge_multiple,
        },
    );

    let document_stats = documents
        .iter()
        .map(|d| DocumentStats {
            doc_id: d.doc_id.clone(),
            chunks: d.chunks,
            raw_records: d.raw_records.len(),
            parse_issues: d.parse_issues.len(),
            normalize_issues: normalize_issue_counts.get(&d.doc_id).copied().unwrap_or(0),
        })
        .collect();

    let manifest = RunManifest {
        timestamp: chrono::Utc::now().to_rfc3339(),
        model_id: options.model.clone(),
        temperature: options.temperature,
        standalone: options.standalone,
        chunk_chars: options.chunk_chars,
        page_delimiter: options.page_delimiter,
        corpus_dir: options.corpus_dir.display().to_string(),
        documents: document_stats,
        failures,
        ingest_issues: corpus
            .issues
            .iter()
            .map(|i| format!("{}: {}", i.path.display(), i.message))
            .collect(),
        cache: gateway.stats().snapshot(),
        records_written: records.len(),
        sample_id_rewrites: outcome.sample_id_rewrites,
    };

    let records_csv = options.out_dir.join("records.csv");
    let records_json = options.out_dir.join("records.json");
    let manifest_path = options.out_dir.join("manifest.json");
    formats::write_records_csv(&records_csv, &records)?;
    formats::write_json(&records_json, &records)?;
    formats::write_json(&manifest_path, &manifest)?;

    Ok(ExtractReport {
        records,
        manifest,
        records_csv,
        records_json,
        manifest_path,
    })
}

fn log_normalize_issues(issues: &[NormalizeIssue]) {
    for issue in issues {
        log::debug!(
            "quarantined row from {}#{} line {}: {} ({})",
            issue.provenance.doc_id,
            issue.provenance.chunk_index,
            issue.provenance.line,
            issue.row,
            issue.reason
        );
    }
}

fn extract_document(
    doc: &DocumentText,
    builder: &PromptBuilder,
    gateway: &Gateway,
    chunk_chars: NonZeroUsize,
    standalone: bool,
) -> Result<DocumentOutcome, (DocumentFailure, FailureClass)> {
    let fail = |error: String, class: FailureClass| {
        (
            DocumentFailure {
                doc_id: doc.doc_id().to_owned(),
                error,
            },
            class,
        )
    };
    let fail_gateway = |err: GatewayError| {
        let class = match err {
            GatewayError::Config(_) => FailureClass::Config,
            _ => FailureClass::Endpoint,
        };
        fail(err.to_string(), class)
    };

    let mut raw_records = Vec::new();
    let mut parse_issues = Vec::new();
    let chunks_used;

    if standalone {
        // Baseline mode: ask about the sample with no document content. The
        // doc id stands in for the sample id.
        let request = builder
            .standalone_prompt(doc.doc_id())
            .map_err(|err| fail(err.to_string(), FailureClass::Config))?;
        let response = gateway.complete(&request).map_err(fail_gateway)?;
        let (records, issues) = parse_completion(&response.text, doc.doc_id(), 0);
        raw_records.extend(records);
        parse_issues.extend(issues);
        chunks_used = 1;
    } else {
        let chunks = chunk_document(doc, chunk_chars);
        chunks_used = chunks.len();
        for chunk in &chunks {
            if chunk.text.trim().is_empty() {
                continue;
            }
            let request = builder
                .extraction_prompt(chunk)
                .map_err(|err| fail(err.to_string(), FailureClass::Config))?;
            let response = gateway.complete(&request).map_err(fail_gateway)?;
            let (records, issues) =
                parse_completion(&response.text, doc.doc_id(), chunk.chunk_index);
            raw_records.extend(records);
            parse_issues.extend(issues);
        }
    }

    Ok(DocumentOutcome {
        doc_id: doc.doc_id().to_owned(),
        chunks: chunks_used,
        raw_records,
        parse_issues,
    })
}

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub records: PathBuf,
    pub truth: PathBuf,
    pub out_dir: PathBuf,
    /// Restrict both sides to one unit before joining (the non-trace
    /// subset is `--units percent`).
    pub units: Option<Unit>,
    pub rel_err_threshold: f64,
}

pub struct EvaluateReport {
    pub matches: Vec<MatchResult>,
    pub metrics: Vec<MetricRow>,
    pub matched: usize,
    pub missed: usize,
    pub false_positives: usize,
    pub notices: Vec<String>,
}

pub fn run_evaluate(options: &EvaluateOptions) -> AppResult<EvaluateReport> {
    let mut records = formats::read_records_csv(&options.records)?;
    let mut truth = formats::load_ground_truth(&options.truth)?;
    if let Some(unit) = options.units {
        records.retain(|r| r.unit == unit);
        truth.retain(|t| t.unit == unit);
    }

    let matches = join_records(&records, &truth);
    let metric_options = MetricOptions {
        rel_err_sensitivity_threshold: options.rel_err_threshold,
    };
    let metrics = compute_metrics(&matches, &metric_options);
    let matrix = recall_matrix(&matches);

    let mut summaries: Vec<(String, Vec<GroupSummary>)> = Vec::new();
    let mut notices = Vec::new();
    for group_by in [GroupBy::Sample, GroupBy::Compound] {
        let mut rows = Vec::new();
        for metric in MetricKind::ALL {
            let (mut part, mut notes) = summarize(&metrics, group_by, metric);
            rows.append(&mut part);
            notices.append(&mut notes);
        }
        summaries.push((group_by.as_str().to_owned(), rows));
    }

    formats::write_metrics_csv(&options.out_dir.join("metrics.csv"), &metrics)?;
    formats::write_json(&options.out_dir.join("metrics.json"), &metrics)?;
    formats::write_recall_matrix_csv(&options.out_dir.join("recall_matrix.csv"), &matrix)?;
    formats::write_json(&options.out_dir.join("recall_matrix.json"), &matrix)?;
    formats::write_json(&options.out_dir.join("summaries.json"), &summaries)?;
    std::fs::write(
        options.out_dir.join("summaries.csv"),
        formats::summaries_to_csv(&summaries),
    )
    .map_err(|err| AppError::input(format!("cannot write summaries.csv: {err}")))?;

    let matched = matches
        .iter()
        .filter(|m| matches!(m.kind, MatchKind::Matched { .. }))
        .count();
    let missed = matches
        .iter()
        .filter(|m| matches!(m.kind, MatchKind::MissedTruth { .. }))
        .count();
    let false_positives = matches
        .iter()
        .filter(|m| matches!(m.kind, MatchKind::FalsePositive { .. }))
        .count();

    Ok(EvaluateReport {
        matches,
        metrics,
        matched,
        missed,
        false_positives,
        notices,
    })
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub records: PathBuf,
    pub out_dir: PathBuf,
    pub min_occurrences: usize,
    pub bins: usize,
}

pub fn run_analyze(options: &AnalyzeOptions) -> AppResult<PathBuf> {
    let records = formats::read_records_csv(&options.records)?;
    let bins = NonZeroUsize::new(options.bins)
        .ok_or_else(|| AppError::config("--bins must be at least 1"))?;

    let frequencies = compound_frequencies(&records, options.min_occurrences);
    let mut distributions = BTreeMap::new();
    for compound in frequencies.counts.keys() {
        if let Some(dist) = interval_distribution(&records, compound, bins) {
            distributions.insert(compound.clone(), dist);
        }
    }

    for (compound, dist) in &distributions {
        let path = options
            .out_dir
            .join("distributions")
            .join(format!("{}.csv", safe_file_name(compound)));
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|err| AppError::input(format!("cannot create {}: {err}", parent.display())))?;
        }
        std::fs::write(&path, formats::distribution_to_csv(dist))
            .map_err(|err| AppError::input(format!("cannot write {}: {err}", path.display())))?;
    }

    let report = formats::AnalyticsReport {
        frequencies,
        distributions,
    };
    let report_path = options.out_dir.join("analytics.json");
    formats::write_json(&report_path, &report)?;
    Ok(report_path)
}

fn safe_file_name(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Intervals,
    Box,
    Matrix,
}

#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub kind: PlotKind,
    pub out_dir: PathBuf,
    /// Primary (with-document) records for interval plots.
    pub records: Option<PathBuf>,
    /// Standalone-baseline records, drawn as a third series.
    pub baseline: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    /// Metric rows for box plots.
    pub metrics: Option<PathBuf>,
    /// Recall matrix CSV for matrix plots.
    pub matrix: Option<PathBuf>,
    pub group_by: GroupBy,
    /// Restrict interval plots to one compound.
    pub compound: Option<String>,
}

/// Renders SVG files; returns the paths written.
pub fn run_plot(options: &PlotOptions) -> AppResult<Vec<PathBuf>> {
    match options.kind {
        PlotKind::Intervals => plot_intervals_cmd(options),
        PlotKind::Box => plot_box_cmd(options),
        PlotKind::Matrix => plot_matrix_cmd(options),
    }
}

fn plot_intervals_cmd(options: &PlotOptions) -> AppResult<Vec<PathBuf>> {
    let records_path = options
        .records
        .as_ref()
        .ok_or_else(|| AppError::config("plot intervals needs --records"))?;
    let records = formats::read_records_csv(records_path)?;
    let truth = options
        .truth
        .as_ref()
        .map(|p| formats::load_ground_truth(p))
        .transpose()?
        .unwrap_or_default();
    let baseline = options
        .baseline
        .as_ref()
        .map(|p| formats::read_records_csv(p))
        .transpose()?
        .unwrap_or_default();

    if records.is_empty() && truth.is_empty() && baseline.is_empty() {
        return Err(AppError::config("plot intervals: no data in the given inputs"));
    }

    // one plot per (compound, unit) present anywhere
    let mut keys: Vec<(String, Unit)> = records
        .iter()
        .map(|r| (r.compound.clone(), r.unit))
        .chain(truth.iter().map(|t| (t.compound.clone(), t.unit)))
        .chain(baseline.iter().map(|r| (r.compound.clone(), r.unit)))
        .collect();
    keys.sort();
    keys.dedup();
    if let Some(filter) = &options.compound {
        keys.retain(|(compound, _)| compound == filter);
        if keys.is_empty() {
            return Err(AppError::config(format!(
                "plot intervals: compound {filter:?} not present in the inputs"
            )));
        }
    }

    let mut written = Vec::new();
    for (compound, unit) in keys {
        let mut series = Vec::new();
        let truth_entries: Vec<(String, regolith_core::Interval)> = truth
            .iter()
            .filter(|t| t.compound == compound && t.unit == unit)
            .map(|t| (t.sample_id.clone(), t.interval))
            .collect();
        if !truth_entries.is_empty() {
            series.push(IntervalSeries {
                label: "truth".to_owned(),
                color: plot::TRUTH_COLOR.to_owned(),
                entries: truth_entries,
            });
        }
        let doc_entries: Vec<(String, regolith_core::Interval)> = records
            .iter()
            .filter(|r| r.compound == compound && r.unit == unit)
            .map(|r| (r.sample_id.clone(), r.interval))
            .collect();
        if !doc_entries.is_empty() {
            series.push(IntervalSeries {
                label: "with doc".to_owned(),
                color: plot::WITH_DOC_COLOR.to_owned(),
                entries: doc_entries,
            });
        }
        let baseline_entries: Vec<(String, regolith_core::Interval)> = baseline
            .iter()
            .filter(|r| r.compound == compound && r.unit == unit)
            .map(|r| (r.sample_id.clone(), r.interval))
            .collect();
        if !baseline_entries.is_empty() {
            series.push(IntervalSeries {
                label: "standalone".to_owned(),
                color: plot::STANDALONE_COLOR.to_owned(),
                entries: baseline_entries,
            });
        }
        let svg = plot::plot_intervals(&format!("{compound} ({unit})"), &series);
        let path = options.out_dir.join(format!(
            "intervals_{}_{}.svg",
            safe_file_name(&compound),
            unit
        ));
        write_svg(&path, &svg)?;
        written.push(path);
    }
    Ok(written)
}

fn plot_box_cmd(options: &PlotOptions) -> AppResult<Vec<PathBuf>> {
    let metrics_path = options
        .metrics
        .as_ref()
        .ok_or_else(|| AppError::config("plot box needs --metrics"))?;
    let rows = formats::read_metrics_csv(metrics_path)?;
    if rows.is_empty() {
        return Err(AppError::config("plot box: metrics file has no rows"));
    }

    let mut written = Vec::new();
    for metric in MetricKind::ALL {
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for row in &rows {
            let group = match options.group_by {
                GroupBy::Sample => row.key.sample_id.clone(),
                GroupBy::Compound => row.key.compound.clone(),
            };
            let value = match metric {
                MetricKind::AbsErr => Some(row.midpoint_abs_err),
                MetricKind::RelErr => row.midpoint_rel_err,
                MetricKind::Precision => Some(row.precision),
                MetricKind::Recall => Some(row.recall),
            };
            if let Some(value) = value {
                groups.entry(group).or_default().push(value);
            }
        }
        if groups.is_empty() {
            continue;
        }
        let mut ordered: Vec<(String, Vec<f64>)> = groups.into_iter().collect();
        if options.group_by == GroupBy::Sample {
            ordered.sort_by(|a, b| regolith_core::normalize::sample_id_cmp(&a.0, &b.0));
        }
        let title = format!("{} by {}", metric.as_str(), options.group_by.as_str());
        let svg = plot::plot_box(&title, &ordered);
        let path = options.out_dir.join(format!(
            "box_{}_by_{}.svg",
            metric.as_str(),
            options.group_by.as_str()
        ));
        write_svg(&path, &svg)?;
        written.push(path);
    }
    Ok(written)
}

fn plot_matrix_cmd(options: &PlotOptions) -> AppResult<Vec<PathBuf>> {
    let matrix_path = options
        .matrix
        .as_ref()
        .ok_or_else(|| AppError::config("plot matrix needs --matrix"))?;
    let matrix = read_recall_matrix_csv(matrix_path)?;
    if matrix.compounds.is_empty() {
        return Err(AppError::config("plot matrix: matrix has no rows"));
    }
    let svg = plot::plot_matrix("recall presence", &matrix);
    let path = options.out_dir.join("recall_matrix.svg");
    write_svg(&path, &svg)?;
    Ok(vec![path])
}

fn read_recall_matrix_csv(path: &Path) -> AppResult<regolith_core::evaluate::RecallMatrix> {
    use regolith_core::evaluate::{CellState, RecallMatrix};
    let content = std::fs::read_to_string(path)
        .map_err(|err| AppError::input(format!("cannot read {}: {err}", path.display())))?;
    let mut lines = content.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, h)| h)
        .ok_or_else(|| AppError::input(format!("{}: empty matrix file", path.display())))?;
    let mut header_fields = header.split(',').map(str::trim);
    if header_fields.next() != Some("compound") {
        return Err(AppError::input(format!(
            "{}: matrix header must start with \"compound\"",
            path.display()
        )));
    }
    let sample_ids: Vec<String> = header_fields.map(str::to_owned).collect();
    let mut compounds = Vec::new();
    let mut cells = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let compound = fields.next().unwrap_or_default();
        let row: Vec<CellState> = fields
            .map(|cell| match cell {
                "provided" => Ok(CellState::Provided),
                "missed" => Ok(CellState::Missed),
                "not-truthed" => Ok(CellState::NotTruthed),
                other => Err(AppError::input(format!(
                    "{}:{}: unknown cell state {other:?}",
                    path.display(),
                    idx + 1
                ))),
            })
            .collect::<AppResult<_>>()?;
        if row.len() != sample_ids.len() {
            return Err(AppError::input(format!(
                "{}:{}: expected {} cells, found {}",
                path.display(),
                idx + 1,
                sample_ids.len(),
                row.len()
            )));
        }
        compounds.push(compound.to_owned());
        cells.push(row);
    }
    Ok(RecallMatrix {
        compounds,
        sample_ids,
        cells,
    })
}

fn write_svg(path: &Path, svg: &str) -> AppResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|err| AppError::input(format!("cannot create {}: {err}", parent.display())))?;
    }
    std::fs::write(path, svg)
        .map_err(|err| AppError::input(format!("cannot write {}: {err}", path.display())))
}

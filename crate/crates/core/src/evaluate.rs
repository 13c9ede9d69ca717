//! Joining extracted records against interval-valued ground truth and
//! scoring the matches.
//!
//! The join is an exact-key match on (sample, compound, unit). A unit
//! mismatch on an otherwise matching (sample, compound) therefore surfaces
//! as both a missed truth and a false positive, which is the intended miss
//! rule: getting the units wrong is not a match. Metrics exist only where
//! ground truth exists.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use crate::interval::{self, Interval};
use crate::normalize::{sample_id_cmp, CompositionRecord, RecordKey, Unit};

/// One manually annotated composition interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthEntry {
    pub compound: String,
    pub sample_id: String,
    pub interval: Interval,
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundTruthError {
    #[error("ground-truth compound must be non-empty")]
    EmptyCompound,
    #[error("ground-truth sample id {0:?} must be digits only")]
    InvalidSampleId(String),
}

impl GroundTruthEntry {
    pub fn new(
        compound: impl Into<String>,
        sample_id: impl Into<String>,
        interval: Interval,
        unit: Unit,
    ) -> Result<Self, GroundTruthError> {
        let compound = compound.into();
        let sample_id = sample_id.into();
        if compound.trim().is_empty() {
            return Err(GroundTruthError::EmptyCompound);
        }
        if sample_id.is_empty() || !sample_id.chars().all(|c| c.is_ascii_digit()) {
            return Err(GroundTruthError::InvalidSampleId(sample_id));
        }
        Ok(Self {
            compound,
            sample_id,
            interval,
            unit,
        })
    }

    pub fn key(&self) -> RecordKey {
        RecordKey::new(self.sample_id.clone(), self.compound.clone(), self.unit)
    }
}

/// Outcome of joining one key across the two sides.
#[derive(Debug, Clone, PartialEq)]
pub enum MatchKind {
    Matched { truth: Interval, estimate: Interval },
    MissedTruth { truth: Interval },
    FalsePositive { estimate: Interval },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub key: RecordKey,
    pub kind: MatchKind,
}

/// Exact-key join. Every truth key and every extracted key lands in exactly
/// one [`MatchResult`]; output is sorted by key and insensitive to input
/// order. Duplicate keys within one side are enveloped first, matching the
/// merge stage's aggregation semantics.
pub fn join_records(
    extracted: &[CompositionRecord],
    truth: &[GroundTruthEntry],
) -> Vec<MatchResult> {
    let mut truth_map: BTreeMap<RecordKey, Interval> = BTreeMap::new();
    for entry in truth {
        truth_map
            .entry(entry.key())
            .and_modify(|iv| *iv = iv.envelope(&entry.interval))
            .or_insert(entry.interval);
    }
    let mut estimate_map: BTreeMap<RecordKey, Interval> = BTreeMap::new();
    for record in extracted {
        estimate_map
            .entry(record.key())
            .and_modify(|iv| *iv = iv.envelope(&record.interval))
            .or_insert(record.interval);
    }

    let mut keys: BTreeSet<RecordKey> = truth_map.keys().cloned().collect();
    keys.extend(estimate_map.keys().cloned());

    keys.into_iter()
        .map(|key| {
            let kind = match (truth_map.get(&key), estimate_map.get(&key)) {
                (Some(truth), Some(estimate)) => MatchKind::Matched {
                    truth: *truth,
                    estimate: *estimate,
                },
                (Some(truth), None) => MatchKind::MissedTruth { truth: *truth },
                (None, Some(estimate)) => MatchKind::FalsePositive {
                    estimate: *estimate,
                },
                (None, None) => unreachable!("key came from one of the two maps"),
            };
            MatchResult { key, kind }
        })
        .collect()
}

/// Per-match scores. Present only for matched keys.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    #[serde(flatten)]
    pub key: RecordKey,
    pub midpoint_abs_err: f64,
    /// Absent when the truth midpoint is exactly zero.
    pub midpoint_rel_err: Option<f64>,
    /// Set when the truth midpoint is below the sensitivity threshold:
    /// relative error is unstable for near-zero denominators.
    pub rel_err_flagged: bool,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    /// Truth midpoints below this value (in the record's own unit) get
    /// their relative error flagged as denominator-sensitive.
    pub rel_err_sensitivity_threshold: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            rel_err_sensitivity_threshold: 0.5,
        }
    }
}

/// Scores every matched pair; misses and false positives produce no row.
pub fn compute_metrics(matches: &[MatchResult], options: &MetricOptions) -> Vec<MetricRow> {
    matches
        .iter()
        .filter_map(|result| match &result.kind {
            MatchKind::Matched { truth, estimate } => Some(MetricRow {
                key: result.key.clone(),
                midpoint_abs_err: interval::midpoint_abs_err(truth, estimate),
                midpoint_rel_err: interval::midpoint_rel_err(truth, estimate),
                rel_err_flagged: truth.midpoint() != 0.0
                    && truth.midpoint() < options.rel_err_sensitivity_threshold,
                precision: interval::precision(truth, estimate),
                recall: interval::recall(truth, estimate),
            }),
            _ => None,
        })
        .collect()
}

/// Tri-state cell of the recall presence matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellState {
    /// Some interval was returned for a truthed key, accuracy aside.
    Provided,
    /// Truth exists but nothing (unit-matching) was extracted.
    Missed,
    /// The pair is not part of the ground truth.
    NotTruthed,
}

impl CellState {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellState::Provided => "provided",
            CellState::Missed => "missed",
            CellState::NotTruthed => "not-truthed",
        }
    }
}

/// Presence matrix over (compound x sample). Rows follow `compounds`,
/// columns follow `sample_ids`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallMatrix {
    pub compounds: Vec<String>,
    pub sample_ids: Vec<String>,
    pub cells: Vec<Vec<CellState>>,
}

/// Builds the presence matrix from join results. A (compound, sample) pair
/// counts as provided exactly when some unit of it matched; unit-mismatched
/// extractions leave the truthed pair missed.
pub fn recall_matrix(matches: &[MatchResult]) -> RecallMatrix {
    let mut compounds: BTreeSet<String> = BTreeSet::new();
    let mut samples: BTreeSet<String> = BTreeSet::new();
    let mut truthed: BTreeSet<(String, String)> = BTreeSet::new();
    let mut provided: BTreeSet<(String, String)> = BTreeSet::new();

    for result in matches {
        let pair = (result.key.compound.clone(), result.key.sample_id.clone());
        compounds.insert(pair.0.clone());
        samples.insert(pair.1.clone());
        match result.kind {
            MatchKind::Matched { .. } => {
                truthed.insert(pair.clone());
                provided.insert(pair);
            }
            MatchKind::MissedTruth { .. } => {
                truthed.insert(pair);
            }
            MatchKind::FalsePositive { .. } => {}
        }
    }

    let compounds: Vec<String> = compounds.into_iter().collect();
    let mut sample_ids: Vec<String> = samples.into_iter().collect();
    sample_ids.sort_by(|a, b| sample_id_cmp(a, b));

    let cells = compounds
        .iter()
        .map(|compound| {
            sample_ids
                .iter()
                .map(|sample| {
                    let pair = (compound.clone(), sample.clone());
                    if provided.contains(&pair) {
                        CellState::Provided
                    } else if truthed.contains(&pair) {
                        CellState::Missed
                    } else {
                        CellState::NotTruthed
                    }
                })
                .collect()
        })
        .collect();

    RecallMatrix {
        compounds,
        sample_ids,
        cells,
    }
}

/// Five-number summary with box-plot outliers (points beyond 1.5 IQR from
/// the quartiles). Quartiles use the median-exclusive method: halves never
/// include the middle element of an odd-length sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub outliers: Vec<f64>,
}

/// Summary statistics for one group, or `None` for an empty sample.
pub fn distribution(values: &[f64]) -> Option<Distribution> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = median_of(&sorted);
    let (q1, q3) = if n == 1 {
        (sorted[0], sorted[0])
    } else {
        (median_of(&sorted[..n / 2]), median_of(&sorted[n.div_ceil(2)..]))
    };
    let iqr = q3 - q1;
    let (low_fence, high_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let outliers = sorted
        .iter()
        .copied()
        .filter(|v| *v < low_fence || *v > high_fence)
        .collect();
    Some(Distribution {
        n,
        min: sorted[0],
        q1,
        median,
        q3,
        max: sorted[n - 1],
        outliers,
    })
}

fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Sample,
    Compound,
}

impl GroupBy {
    pub fn as_str(&self) -> &'static str {
        match self {
            GroupBy::Sample => "sample",
            GroupBy::Compound => "compound",
        }
    }
}

/// Which score of a [`MetricRow`] to summarize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    AbsErr,
    RelErr,
    Precision,
    Recall,
}

impl MetricKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::AbsErr => "abs_err",
            MetricKind::RelErr => "rel_err",
            MetricKind::Precision => "precision",
            MetricKind::Recall => "recall",
        }
    }

    pub const ALL: [MetricKind; 4] = [
        MetricKind::AbsErr,
        MetricKind::RelErr,
        MetricKind::Precision,
        MetricKind::Recall,
    ];

    fn select(&self, row: &MetricRow) -> Option<f64> {
        match self {
            MetricKind::AbsErr => Some(row.midpoint_abs_err),
            MetricKind::RelErr => row.midpoint_rel_err,
            MetricKind::Precision => Some(row.precision),
            MetricKind::Recall => Some(row.recall),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub metric: MetricKind,
    #[serde(flatten)]
    pub dist: Distribution,
}

/// Summarizes one metric per group. Groups with no defined values (for
/// example all relative errors undefined) are omitted, with a notice
/// recorded instead of a row.
pub fn summarize(
    rows: &[MetricRow],
    group_by: GroupBy,
    metric: MetricKind,
) -> (Vec<GroupSummary>, Vec<String>) {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in rows {
        let group = match group_by {
            GroupBy::Sample => row.key.sample_id.clone(),
            GroupBy::Compound => row.key.compound.clone(),
        };
        let values = groups.entry(group).or_default();
        if let Some(value) = metric.select(row) {
            values.push(value);
        }
    }

    let mut names: Vec<String> = groups.keys().cloned().collect();
    if group_by == GroupBy::Sample {
        names.sort_by(|a, b| sample_id_cmp(a, b));
    }

    let mut summaries = Vec::new();
    let mut notices = Vec::new();
    for name in names {
        match distribution(&groups[&name]) {
            Some(dist) => summaries.push(GroupSummary {
                group: name,
                metric,
                dist,
            }),
            None => notices.push(alloc::format!(
                "{} {:?}: no defined {} values; group omitted",
                group_by.as_str(),
                name,
                metric.as_str()
            )),
        }
    }
    (summaries, notices)
}

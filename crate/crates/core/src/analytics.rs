//! Full-corpus analyses of extraction output: compound occurrence counts
//! with a low-count discard rule, and per-compound interval distributions.
//!
//! Discarding is report-level only. Compounds that occur rarely are
//! presumed extraction errors and moved to the report's discard list, but
//! nothing is removed from the normalized store itself.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::num::NonZeroUsize;

use serde::Serialize;

use crate::interval::Interval;
use crate::normalize::{sample_id_cmp, CompositionRecord};

pub const DEFAULT_MIN_OCCURRENCE_THRESHOLD: usize = 5;
pub const DEFAULT_HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscardedCompound {
    pub compound: String,
    pub count: usize,
}

/// Occurrence counts split into kept (count > threshold) and discarded
/// (count <= threshold) compounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyReport {
    pub threshold: usize,
    pub total_records: usize,
    pub counts: BTreeMap<String, usize>,
    pub discarded: Vec<DiscardedCompound>,
}

/// Counts records per canonical compound. Compounds appearing `threshold`
/// or fewer times land in the discard list.
pub fn compound_frequencies(records: &[CompositionRecord], threshold: usize) -> FrequencyReport {
    let mut all: BTreeMap<String, usize> = BTreeMap::new();
    for record in records {
        *all.entry(record.compound.clone()).or_insert(0) += 1;
    }
    let mut counts = BTreeMap::new();
    let mut discarded = Vec::new();
    for (compound, count) in all {
        if count > threshold {
            counts.insert(compound, count);
        } else {
            discarded.push(DiscardedCompound { compound, count });
        }
    }
    FrequencyReport {
        threshold,
        total_records: records.len(),
        counts,
        discarded,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistEntry {
    pub sample_id: String,
    pub interval: Interval,
}

/// Equal-width histogram over `[0, max]`; the last bin includes its upper
/// edge. A single degenerate maximum collapses to one `[0, 0]` bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// All intervals extracted for one compound, ordered by lower bound, with
/// the distribution of their lengths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalDistribution {
    pub compound: String,
    pub entries: Vec<DistEntry>,
    pub length_histogram: Histogram,
}

/// Collects and orders the intervals recorded for `compound`. Returns
/// `None` when the compound never occurs, so callers can issue a notice.
pub fn interval_distribution(
    records: &[CompositionRecord],
    compound: &str,
    bins: NonZeroUsize,
) -> Option<IntervalDistribution> {
    let mut entries: Vec<DistEntry> = records
        .iter()
        .filter(|r| r.compound == compound)
        .map(|r| DistEntry {
            sample_id: r.sample_id.clone(),
            interval: r.interval,
        })
        .collect();
    if entries.is_empty() {
        return None;
    }
    entries.sort_by(|a, b| {
        a.interval
            .lo()
            .total_cmp(&b.interval.lo())
            .then_with(|| a.interval.hi().total_cmp(&b.interval.hi()))
            .then_with(|| sample_id_cmp(&a.sample_id, &b.sample_id))
    });

    let lengths: Vec<f64> = entries.iter().map(|e| e.interval.length()).collect();
    Some(IntervalDistribution {
        compound: compound.to_string(),
        length_histogram: histogram(&lengths, bins.get()),
        entries,
    })
}

fn histogram(lengths: &[f64], bins: usize) -> Histogram {
    let max = lengths.iter().copied().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return Histogram {
            edges: alloc::vec![0.0, 0.0],
            counts: alloc::vec![lengths.len()],
        };
    }
    let edges: Vec<f64> = (0..=bins).map(|i| max * i as f64 / bins as f64).collect();
    let mut counts = alloc::vec![0usize; bins];
    for &len in lengths {
        let bin = (((len / max) * bins as f64) as usize).min(bins - 1);
        counts[bin] += 1;
    }
    Histogram { edges, counts }
}

//! Builders shared by unit tests across modules.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::vec;

use crate::evaluate::GroundTruthEntry;
use crate::interval::Interval;
use crate::normalize::{CompositionRecord, SourceRef, Unit};

pub(crate) fn record(
    compound: &str,
    sample: &str,
    lo: f64,
    hi: f64,
    unit: Unit,
    doc: &str,
    chunk: usize,
) -> CompositionRecord {
    CompositionRecord {
        compound: compound.to_owned(),
        sample_id: sample.to_owned(),
        interval: Interval::new(lo, hi).unwrap(),
        unit,
        provenance: vec![SourceRef {
            doc_id: doc.to_owned(),
            chunk_index: chunk,
        }],
        flags: BTreeSet::new(),
    }
}

pub(crate) fn truth(compound: &str, sample: &str, lo: f64, hi: f64, unit: Unit) -> GroundTruthEntry {
    GroundTruthEntry::new(compound, sample, Interval::new(lo, hi).unwrap(), unit).unwrap()
}

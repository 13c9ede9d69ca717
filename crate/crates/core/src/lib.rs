//! Core stages of a composition-mining pipeline: page-aware chunking,
//! extraction-prompt construction, tolerant parsing of model-produced
//! tables, record normalization and merging, interval comparison metrics,
//! ground-truth evaluation, and corpus analytics.
//!
//! Everything in this crate is pure computation over in-memory values.
//! Filesystem, network, and file-format concerns live in the companion
//! CLI crate, which keeps this one `no_std`-compatible (`alloc` required).

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analytics;
pub mod chunk;
pub mod evaluate;
pub mod interval;
pub mod normalize;
pub mod parse;
pub mod prompt;

#[cfg(test)]
pub(crate) mod testutil;

pub use interval::Interval;
pub use normalize::{CompositionRecord, RecordKey, RepairFlag, SourceRef, Unit};

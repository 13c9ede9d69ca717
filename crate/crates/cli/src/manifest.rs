//! Run manifest: the configuration and per-document accounting every
//! `extract` run writes next to its records. Results depend on the model,
//! prompt, and chunking configuration, so reruns need it on record.

use serde::Serialize;

use crate::gateway::CacheStatsSnapshot;

#[derive(Debug, Clone, Serialize)]
pub struct DocumentStats {
    pub doc_id: String,
    pub chunks: usize,
    pub raw_records: usize,
    pub parse_issues: usize,
    pub normalize_issues: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DocumentFailure {
    pub doc_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// RFC 3339; the one field excluded from byte-identity comparisons.
    pub timestamp: String,
    pub model_id: String,
    pub temperature: f64,
    pub standalone: bool,
    pub chunk_chars: usize,
    pub page_delimiter: char,
    pub corpus_dir: String,
    pub documents: Vec<DocumentStats>,
    pub failures: Vec<DocumentFailure>,
    pub ingest_issues: Vec<String>,
    pub cache: CacheStatsSnapshot,
    pub records_written: usize,
    pub sample_id_rewrites: usize,
}

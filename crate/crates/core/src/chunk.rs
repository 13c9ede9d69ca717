//! Page-preserving document text and greedy chunk packing.
//!
//! Long documents are split into pieces sized for a model context window.
//! Splits only ever happen at page boundaries: pages are packed greedily
//! into chunks up to a character budget, and a page longer than the whole
//! budget becomes a single over-length chunk rather than being cut.

use alloc::string::String;
use alloc::vec::Vec;
use core::num::NonZeroUsize;

use thiserror::Error;

/// Text of one source document, split into pages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentText {
    doc_id: String,
    pages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DocumentError {
    #[error("document id must be non-empty")]
    EmptyDocId,
    #[error("document {0:?} has no pages")]
    NoPages(String),
}

impl DocumentText {
    pub fn new(doc_id: impl Into<String>, pages: Vec<String>) -> Result<Self, DocumentError> {
        let doc_id = doc_id.into();
        if doc_id.is_empty() {
            return Err(DocumentError::EmptyDocId);
        }
        if pages.is_empty() {
            return Err(DocumentError::NoPages(doc_id));
        }
        Ok(Self { doc_id, pages })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn pages(&self) -> &[String] {
        &self.pages
    }
}

/// A contiguous run of whole pages from one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentChunk {
    pub doc_id: String,
    pub chunk_index: usize,
    /// Inclusive (first, last) 1-based page ordinals covered by this chunk.
    pub page_span: (usize, usize),
    pub text: String,
}

/// Splits a document into chunks of at most `max_chunk_chars` characters.
///
/// Pages are appended to the current chunk until the next page would push
/// it past the budget, at which point a new chunk starts. Concatenating the
/// chunk texts in order reproduces the concatenation of the pages exactly.
pub fn chunk_document(doc: &DocumentText, max_chunk_chars: NonZeroUsize) -> Vec<DocumentChunk> {
    let max = max_chunk_chars.get();
    let mut chunks = Vec::new();
    let mut text = String::new();
    let mut chars = 0usize;
    let mut pages_in_chunk = 0usize;
    let mut first_page = 0usize;

    for (page_idx, page) in doc.pages.iter().enumerate() {
        let page_chars = page.chars().count();
        if pages_in_chunk > 0 && chars + page_chars > max {
            push_chunk(&mut chunks, doc, first_page, page_idx - 1, core::mem::take(&mut text));
            chars = 0;
            pages_in_chunk = 0;
            first_page = page_idx;
        }
        text.push_str(page);
        chars += page_chars;
        pages_in_chunk += 1;
    }
    push_chunk(&mut chunks, doc, first_page, doc.pages.len() - 1, text);
    chunks
}

fn push_chunk(
    chunks: &mut Vec<DocumentChunk>,
    doc: &DocumentText,
    first_page: usize,
    last_page: usize,
    text: String,
) {
    chunks.push(DocumentChunk {
        doc_id: doc.doc_id.clone(),
        chunk_index: chunks.len(),
        page_span: (first_page + 1, last_page + 1),
        text,
    });
}

//! Extraction-prompt construction and deterministic request fingerprints.
//!
//! Two prompt shapes exist: the with-document prompt, which appends a chunk
//! of corpus text to the instruction block, and the standalone prompt,
//! which asks about a sample id with no corpus content at all (the
//! comparison baseline). Requests are fingerprinted so responses can be
//! cached and replayed byte-for-byte.

use alloc::string::String;
use alloc::format;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chunk::DocumentChunk;

/// Instruction block sent ahead of the document text. The exemplar rows are
/// load-bearing: the response parser expects this table shape, including
/// the tolerated trailing commas.
// The sentence "Specifically, list the abundance percentages (..." is
// completed here with a units enumeration; the instruction text this
// template carries forward truncates mid-parenthesis.
pub const EXTRACTION_TEMPLATE: &str = "The document text below contains data related to one or more Apollo lunar samples. Please extract all the chemical composition information. If there is no obvious composition content in text, it is acceptable to return an empty table.

Specifically, list the abundance percentages (or ppm/ppb quantities, as reported) for each compound and sample as an interval from the minimum to the maximum reported value.

It is okay if you can only give your best guess at composition percentages, if you are not sure on the exact answer. Either way, you MUST answer. Do not respond with any other text besides this table. An example of a valid response might be:

Compound, SampleId, weight, units
SiO2, 15535, 44.46-45.5, percent,
TiO2, 15535, 2.15-2.51,  percent,
Cr,   15535, 3900-5094,  ppm,
SiO2, 15536, 44.1-44.6,  percent,
TiO2, 15536, 2.14-2.7,   percent,
Cr,   15536, 4100-6419,  ppm";

/// Baseline prompt asking about one sample with no document content.
/// `{sample_id}` is substituted before sending.
pub const STANDALONE_TEMPLATE: &str = "Please list the chemical composition information for Apollo lunar sample {sample_id}, as an interval from the minimum to the maximum value reported in the literature.

It is okay if you can only give your best guess at composition percentages, if you are not sure on the exact answer. Either way, you MUST answer. Do not respond with any other text besides this table. An example of a valid response might be:

Compound, SampleId, weight, units
SiO2, 15535, 44.46-45.5, percent,
TiO2, 15535, 2.15-2.51,  percent,
Cr,   15535, 3900-5094,  ppm,
SiO2, 15536, 44.1-44.6,  percent,
TiO2, 15536, 2.14-2.7,   percent,
Cr,   15536, 4100-6419,  ppm";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PromptError {
    #[error("model id must be non-empty")]
    EmptyModelId,
    #[error("temperature must be a finite value >= 0, got {0}")]
    InvalidTemperature(f64),
    #[error("chunk {chunk_index} of document {doc_id:?} has no text")]
    EmptyChunk { doc_id: String, chunk_index: usize },
    #[error("sample id must be non-empty")]
    EmptySampleId,
}

/// A fully determined model request. The fingerprint is a pure function of
/// the other fields, stable across processes and platforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub model_id: String,
    pub temperature: f64,
    pub prompt_text: String,
    fingerprint: String,
}

impl PromptRequest {
    pub fn new(
        model_id: impl Into<String>,
        temperature: f64,
        prompt_text: impl Into<String>,
    ) -> Self {
        let model_id = model_id.into();
        let prompt_text = prompt_text.into();
        let fingerprint = fingerprint(&model_id, temperature, &prompt_text);
        Self {
            model_id,
            temperature,
            prompt_text,
            fingerprint,
        }
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

/// One model completion, with token usage as reported by the endpoint.
/// Empty text is a valid, recordable outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    #[serde(default)]
    pub from_cache: bool,
}

/// Builds requests for a fixed (model, temperature) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBuilder {
    model_id: String,
    temperature: f64,
}

impl PromptBuilder {
    pub fn new(model_id: impl Into<String>, temperature: f64) -> Result<Self, PromptError> {
        let model_id = model_id.into();
        if model_id.is_empty() {
            return Err(PromptError::EmptyModelId);
        }
        if !temperature.is_finite() || temperature < 0.0 {
            return Err(PromptError::InvalidTemperature(temperature));
        }
        Ok(Self {
            model_id,
            temperature,
        })
    }

    /// With-document prompt: instruction block plus the chunk text.
    pub fn extraction_prompt(&self, chunk: &DocumentChunk) -> Result<PromptRequest, PromptError> {
        if chunk.text.is_empty() {
            return Err(PromptError::EmptyChunk {
                doc_id: chunk.doc_id.clone(),
                chunk_index: chunk.chunk_index,
            });
        }
        let prompt = format!("{EXTRACTION_TEMPLATE}\n\n{}", chunk.text);
        Ok(PromptRequest::new(
            self.model_id.clone(),
            self.temperature,
            prompt,
        ))
    }

    /// Standalone baseline prompt for one sample id, no document content.
    pub fn standalone_prompt(&self, sample_id: &str) -> Result<PromptRequest, PromptError> {
        if sample_id.trim().is_empty() {
            return Err(PromptError::EmptySampleId);
        }
        let prompt = STANDALONE_TEMPLATE.replace("{sample_id}", sample_id.trim());
        Ok(PromptRequest::new(
            self.model_id.clone(),
            self.temperature,
            prompt,
        ))
    }
}

/// SHA-256 over a field-tagged encoding of the request. The temperature is
/// hashed by its IEEE-754 bit pattern so the value round-trips exactly.
fn fingerprint(model_id: &str, temperature: f64, prompt_text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"model\x1f");
    hasher.update(model_id.as_bytes());
    hasher.update(b"\x1ftemperature\x1f");
    hasher.update(temperature.to_bits().to_be_bytes());
    hasher.update(b"\x1fprompt\x1f");
    hasher.update(prompt_text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

//! Builds a small offline demo: a three-document corpus, a replay cache
//! with canned responses for every chunk, and a matching ground-truth
//! file. With the cache populated, `regolith extract` runs with no API
//! key and no network.
//!
//! Usage: cargo run -p regolith-cli --example make_fixture -- <dir>

use std::fs;
use std::num::NonZeroUsize;
use std::path::Path;

use regolith_cli::gateway::ReplayCache;
use regolith_core::chunk::{chunk_document, DocumentText};
use regolith_core::prompt::{CompletionResponse, PromptBuilder};

fn cache_doc(cache: &ReplayCache, builder: &PromptBuilder, doc_id: &str, body: &str, reply: &str) {
    let pages: Vec<String> = body.split('\u{000c}').map(str::to_owned).collect();
    let doc = DocumentText::new(doc_id, pages).unwrap();
    for chunk in chunk_document(&doc, NonZeroUsize::new(25_000).unwrap()) {
        let request = builder.extraction_prompt(&chunk).unwrap();
        let response = CompletionResponse {
            text: reply.to_owned(),
            prompt_tokens: 900,
            completion_tokens: 80,
            from_cache: false,
        };
        cache.store(&request, &response).unwrap();
    }
}

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "demo".to_owned());
    let dir = Path::new(&dir);
    let corpus = dir.join("corpus");
    fs::create_dir_all(&corpus).unwrap();
    let cache = ReplayCache::open(dir.join("cache")).unwrap();
    let builder = PromptBuilder::new("gpt-4o", 0.0).unwrap();

    let docs = [
        (
            "10047",
            "Sample 10047: ilmenite basalt. Composition summarized from several studies.",
            "```\nCompound, SampleId, weight, units\nSiO2, 10047, 40.1-42.0, percent,\nTiO2, 10047, 9.0-9.5, percent\n```",
        ),
        (
            "15415",
            "Sample 15415: ferroan anorthosite. Trace FeO, dominant Al2O3.",
            "Compound, SampleId, weight, units\nFeO, 15415, 0.08-0.202, percent,\nAl2O3, 15415, 35.1, percent",
        ),
        (
            "14321",
            "Sample 14321: polymict breccia with a granite clast.",
            "Compound, SampleId, weight, units\nSiO2, 14321 granite, 73.0-74.5, percent\nMgO, 14321, 100-200, ppm",
        ),
    ];
    for (doc_id, body, reply) in docs {
        fs::write(corpus.join(format!("{doc_id}.txt")), body).unwrap();
        cache_doc(&cache, &builder, doc_id, body, reply);
    }

    fs::write(
        dir.join("truth.csv"),
        "compound,sample_id,lo,hi,unit\n\
         SiO2,10047,40.3,41.9,percent\n\
         TiO2,10047,9.1,9.6,percent\n\
         FeO,15415,0.199,0.202,percent\n\
         Al2O3,15415,34.0,36.0,percent\n\
         SiO2,14321,72.0,75.0,percent\n\
         MgO,14321,0.01,0.02,percent\n\
         S,14321,0.05,0.1,percent\n",
    )
    .unwrap();

    println!("fixture written to {}", dir.display());
    println!("corpus: {}", corpus.display());
    println!("cache:  {}", dir.join("cache").display());
    println!("truth:  {}", dir.join("truth.csv").display());
}

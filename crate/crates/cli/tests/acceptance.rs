//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its runtime. Expected values are hand-computed oracles frozen before the
//! implementation was written; property checks use seeded randomness so
//! every run covers the same cases.

use std::fs;
use std::num::NonZeroUsize;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use regolith_cli::gateway::ReplayCache;
use regolith_core::analytics::compound_frequencies;
use regolith_core::chunk::{chunk_document, DocumentChunk, DocumentText};
use regolith_core::evaluate::{join_records, GroundTruthEntry, MatchKind};
use regolith_core::interval::{
    midpoint_abs_err, midpoint_rel_err, precision, recall, Interval,
};
use regolith_core::normalize::{
    dedupe_and_merge, normalize_records, CompositionRecord, MergeOptions, SourceRef, Unit,
};
use regolith_core::parse::parse_completion;
use regolith_core::prompt::{CompletionResponse, PromptBuilder, EXTRACTION_TEMPLATE};
use regolith_core::RecordKey;

struct Criterion {
    name: &'static str,
    budget: Duration,
    start: Instant,
}

impl Criterion {
    fn start(name: &'static str, budget_secs: u64) -> Self {
        Self {
            name,
            budget: Duration::from_secs(budget_secs),
            start: Instant::now(),
        }
    }

    fn pass(self, detail: &str) {
        let elapsed = self.start.elapsed();
        println!(
            "ACCEPTANCE {} PASS ({} ms): {detail}",
            self.name,
            elapsed.as_millis()
        );
        assert!(
            elapsed <= self.budget,
            "{} exceeded its {}s runtime budget ({:?})",
            self.name,
            self.budget.as_secs(),
            elapsed
        );
    }
}

fn iv(lo: f64, hi: f64) -> Interval {
    Interval::new(lo, hi).unwrap()
}

// ---- C1 -------------------------------------------------------------------

#[test]
fn criterion_1_feo_15415_regression_fixture() {
    let c = Criterion::start("C1", 1);
    let truth = iv(0.199, 0.202);
    let estimate = iv(0.08, 0.202);

    let rel = midpoint_rel_err(&truth, &estimate).expect("nonzero truth midpoint");
    assert!(
        (29.5..=30.0).contains(&rel),
        "midpoint relative error {rel} outside [29.5, 30.0]"
    );
    let r = recall(&truth, &estimate);
    assert!((r - 1.0).abs() <= 1e-12, "recall {r}");
    let p = precision(&truth, &estimate);
    let expected_p = 0.003 / 0.122;
    assert!(
        (p - expected_p).abs() <= 1e-12,
        "precision {p} vs {expected_p}"
    );

    c.pass(&format!("rel_err={rel:.4}% recall={r} precision={p:.6}"));
}

// ---- C2 -------------------------------------------------------------------

#[test]
fn criterion_2_exemplar_block_round_trip() {
    let c = Criterion::start("C2", 1);
    // the exemplar table exactly as the extraction prompt shows it
    let block = EXTRACTION_TEMPLATE
        .split("might be:\n\n")
        .nth(1)
        .expect("template carries the exemplar block");
    assert_eq!(block.lines().count(), 7, "header plus six rows");

    let (raw, parse_issues) = parse_completion(block, "15535", 0);
    assert_eq!(parse_issues, vec![], "exemplar block must parse cleanly");
    assert_eq!(raw.len(), 6);

    let outcome = normalize_records(&raw);
    assert_eq!(outcome.issues, vec![]);
    let records = dedupe_and_merge(outcome.records, &MergeOptions::default());
    assert_eq!(records.len(), 6);

    let expect = [
        ("15535", "Cr", 3900.0, 5094.0, Unit::Ppm),
        ("15535", "SiO2", 44.46, 45.5, Unit::Percent),
        ("15535", "TiO2", 2.15, 2.51, Unit::Percent),
        ("15536", "Cr", 4100.0, 6419.0, Unit::Ppm),
        ("15536", "SiO2", 44.1, 44.6, Unit::Percent),
        ("15536", "TiO2", 2.14, 2.7, Unit::Percent),
    ];
    for (record, (sample, compound, lo, hi, unit)) in records.iter().zip(expect) {
        assert_eq!(record.sample_id, sample);
        assert_eq!(record.compound, compound);
        assert_eq!(record.interval.lo(), lo);
        assert_eq!(record.interval.hi(), hi);
        assert_eq!(record.unit, unit);
        assert!(record.flags.is_empty());
    }

    c.pass("6 exemplar rows parsed and normalized, zero issues");
}

// ---- C3 -------------------------------------------------------------------

/// Ratio of uniformly spaced sample points of `src` that land in
/// `[lo, hi]`. The points are never materialized: the count of lattice
/// indices inside the window is computed directly, so `n` can be large
/// enough to drive the quadrature error below 1e-9.
fn grid_membership_ratio(src: &Interval, lo: f64, hi: f64, n: u64) -> f64 {
    let h = src.length() / n as f64;
    if h == 0.0 {
        return if lo <= src.lo() && src.lo() <= hi {
            1.0
        } else {
            0.0
        };
    }
    let k_min = ((lo - src.lo()) / h - 0.5).ceil().max(0.0);
    let k_max = ((hi - src.lo()) / h - 0.5).floor().min((n - 1) as f64);
    if k_max < k_min {
        return 0.0;
    }
    (k_max - k_min + 1.0) / n as f64
}

fn random_interval(rng: &mut ChaCha8Rng, allow_degenerate: bool) -> Interval {
    let lo: f64 = rng.random_range(-100.0..100.0);
    let len: f64 = if allow_degenerate && rng.random_bool(0.1) {
        0.0
    } else {
        rng.random_range(1e-6..50.0)
    };
    iv(lo, lo + len)
}

/// Dyadic lattice values (multiples of 2^-10, magnitude < 1024) make
/// translation and power-of-two scaling exact in f64, so the invariance
/// properties can be asserted bitwise instead of within a tolerance.
fn dyadic_interval(rng: &mut ChaCha8Rng) -> Interval {
    let lo = rng.random_range(-524_288..524_288) as f64 / 1024.0;
    let len = rng.random_range(1..262_144) as f64 / 1024.0;
    iv(lo, lo + len)
}

#[test]
fn criterion_3_interval_metric_property_suite() {
    let c = Criterion::start("C3", 30);
    let mut rng = ChaCha8Rng::seed_from_u64(0x1ea5_0317);
    let cases = 10_000;
    const GRID_N: u64 = 1 << 36;

    for _ in 0..cases {
        let t = random_interval(&mut rng, true);
        let e = random_interval(&mut rng, true);

        // range bounds
        let p = precision(&t, &e);
        let r = recall(&t, &e);
        assert!((0.0..=1.0).contains(&p), "precision {p} for {t} {e}");
        assert!((0.0..=1.0).contains(&r), "recall {r} for {t} {e}");

        // duality: precision(T, E) = recall(E, T)
        assert_eq!(p, recall(&e, &t), "duality broke for {t} {e}");
        assert_eq!(r, precision(&e, &t), "duality broke for {t} {e}");

        // containment => perfect scores
        if t.contains_interval(&e) {
            assert_eq!(p, 1.0, "E within T must give precision 1 ({t} {e})");
        }
        if e.contains_interval(&t) {
            assert_eq!(r, 1.0, "T within E must give recall 1 ({t} {e})");
        }

        // sampling oracle: |T∩E|/|E| and |T∩E|/|T| within 1e-9
        let overlap_lo = t.lo().max(e.lo());
        let overlap_hi = t.hi().min(e.hi());
        if !e.is_degenerate() {
            let oracle = grid_membership_ratio(&e, overlap_lo, overlap_hi, GRID_N);
            assert!(
                (p - oracle).abs() <= 1e-9,
                "precision {p} vs oracle {oracle} for {t} {e}"
            );
        }
        if !t.is_degenerate() {
            let oracle = grid_membership_ratio(&t, overlap_lo, overlap_hi, GRID_N);
            assert!(
                (r - oracle).abs() <= 1e-9,
                "recall {r} vs oracle {oracle} for {t} {e}"
            );
        }

        // translation invariance is exact on the dyadic lattice
        let dt = dyadic_interval(&mut rng);
        let de = dyadic_interval(&mut rng);
        let shift = rng.random_range(-524_288..524_288) as f64 / 1024.0;
        let dts = iv(dt.lo() + shift, dt.hi() + shift);
        let des = iv(de.lo() + shift, de.hi() + shift);
        assert_eq!(dt.length(), dts.length());
        assert_eq!(
            midpoint_abs_err(&dt, &de),
            midpoint_abs_err(&dts, &des),
            "translation changed abs err"
        );
        assert_eq!(precision(&dt, &de), precision(&dts, &des));
        assert_eq!(recall(&dt, &de), recall(&dts, &des));

        // positive scaling by powers of two is exact: precision/recall and
        // rel err invariant, abs err scales by s
        let scale = 2.0_f64.powi(rng.random_range(-4..=4));
        let dtk = iv(dt.lo() * scale, dt.hi() * scale);
        let dek = iv(de.lo() * scale, de.hi() * scale);
        assert_eq!(precision(&dt, &de), precision(&dtk, &dek));
        assert_eq!(recall(&dt, &de), recall(&dtk, &dek));
        assert_eq!(
            midpoint_abs_err(&dtk, &dek),
            scale * midpoint_abs_err(&dt, &de)
        );
        assert_eq!(midpoint_rel_err(&dt, &de), midpoint_rel_err(&dtk, &dek));
    }

    c.pass(&format!(
        "{cases} randomized cases: bounds, duality, containment, translation, scaling, grid oracle at 1e-9"
    ));
}

// ---- C4 -------------------------------------------------------------------

fn random_record(rng: &mut ChaCha8Rng) -> CompositionRecord {
    let compounds = ["SiO2", "FeO", "TiO2", "Al2O3"];
    let samples = ["10047", "15415", "14321"];
    let units = [Unit::Percent, Unit::Ppm];
    let lo: f64 = rng.random_range(0.0..50.0);
    let len: f64 = if rng.random_bool(0.15) {
        0.0
    } else {
        rng.random_range(0.0..10.0)
    };
    let mut flags = std::collections::BTreeSet::new();
    if rng.random_bool(0.2) {
        flags.insert(regolith_core::RepairFlag::SingleValueRepaired);
    }
    CompositionRecord {
        compound: compounds[rng.random_range(0..compounds.len())].to_owned(),
        sample_id: samples[rng.random_range(0..samples.len())].to_owned(),
        interval: iv(lo, lo + len),
        unit: units[rng.random_range(0..units.len())],
        provenance: vec![SourceRef {
            doc_id: samples[rng.random_range(0..samples.len())].to_owned(),
            chunk_index: rng.random_range(0..3),
        }],
        flags,
    }
}

/// Envelope-semantics projection: key, exact interval bits, provenance.
fn project(records: &[CompositionRecord]) -> Vec<(RecordKey, u64, u64, Vec<SourceRef>)> {
    records
        .iter()
        .map(|r| {
            (
                r.key(),
                r.interval.lo().to_bits(),
                r.interval.hi().to_bits(),
                r.provenance.clone(),
            )
        })
        .collect()
}

#[test]
fn criterion_4_merge_algebra_suite() {
    let c = Criterion::start("C4", 10);
    let mut rng = ChaCha8Rng::seed_from_u64(0x4ead_cafe);
    let options = MergeOptions::default();
    let cases = 1_000;

    for _ in 0..cases {
        let n = rng.random_range(0..24);
        let records: Vec<CompositionRecord> = (0..n).map(|_| random_record(&mut rng)).collect();

        let merged = dedupe_and_merge(records.clone(), &options);

        // unique, sorted output keys
        let keys: Vec<RecordKey> = merged.iter().map(|r| r.key()).collect();
        let mut deduped = keys.clone();
        deduped.dedup();
        assert_eq!(keys, deduped, "duplicate output keys");
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted, "output not sorted");

        // every input interval is contained in its key's envelope
        for input in &records {
            let out = merged
                .iter()
                .find(|r| r.key() == input.key())
                .expect("input key lost by merge");
            assert!(
                out.interval.contains_interval(&input.interval),
                "envelope {} does not contain input {}",
                out.interval,
                input.interval
            );
        }

        // idempotence (full record equality, flags included)
        let twice = dedupe_and_merge(merged.clone(), &options);
        assert_eq!(twice, merged, "merge is not idempotent");

        // commutativity (full record equality)
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut rng);
        assert_eq!(
            dedupe_and_merge(shuffled, &options),
            merged,
            "merge depends on input order"
        );

        // associativity of the envelope: merging premerged halves equals
        // merging everything at once (keys, intervals, provenance)
        let split = if records.is_empty() {
            0
        } else {
            rng.random_range(0..records.len())
        };
        let (a, b) = records.split_at(split);
        let mut staged = dedupe_and_merge(a.to_vec(), &options);
        staged.extend(dedupe_and_merge(b.to_vec(), &options));
        let staged = dedupe_and_merge(staged, &options);
        assert_eq!(
            project(&staged),
            project(&merged),
            "envelope of envelopes differs from envelope of union"
        );
    }

    c.pass(&format!(
        "{cases} randomized multisets: unique keys, containment, idempotent, commutative, associative"
    ));
}

// ---- C5 -------------------------------------------------------------------

#[test]
fn criterion_5_chunking_suite() {
    let c = Criterion::start("C5", 10);
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c47_0b0e);
    let cases = 1_000;

    for _ in 0..cases {
        let page_count = rng.random_range(1..12);
        let pages: Vec<String> = (0..page_count)
            .map(|i| {
                let len = rng.random_range(0..60);
                format!("{}", i % 10).repeat(len)
            })
            .collect();
        let doc = DocumentText::new("10047", pages.clone()).unwrap();
        let max = rng.random_range(1..80);
        let chunks = chunk_document(&doc, NonZeroUsize::new(max).unwrap());

        // lossless partition
        let joined: String = chunks.iter().map(|ch| ch.text.as_str()).collect();
        assert_eq!(joined, pages.concat(), "chunking lost or reordered text");

        // page-boundary alignment and the size bound
        let mut next_page = 1;
        for chunk in &chunks {
            assert_eq!(chunk.page_span.0, next_page, "gap in page spans");
            let span_text: String = pages[chunk.page_span.0 - 1..chunk.page_span.1].concat();
            assert_eq!(chunk.text, span_text, "chunk text not whole pages");
            let single_page = chunk.page_span.0 == chunk.page_span.1;
            assert!(
                chunk.text.chars().count() <= max || single_page,
                "multi-page chunk over budget"
            );
            next_page = chunk.page_span.1 + 1;
        }
        assert_eq!(next_page, pages.len() + 1, "pages left uncovered");

        // monotonicity in the budget
        let larger = chunk_document(&doc, NonZeroUsize::new(max + rng.random_range(1..40)).unwrap());
        assert!(
            larger.len() <= chunks.len(),
            "bigger budget produced more chunks"
        );

        // determinism
        let again = chunk_document(&doc, NonZeroUsize::new(max).unwrap());
        assert_eq!(again, chunks);
    }

    c.pass(&format!(
        "{cases} randomized page vectors: lossless, page-aligned, size-bounded, monotone"
    ));
}

// ---- C6 -------------------------------------------------------------------

#[test]
fn criterion_6_join_partition_property() {
    let c = Criterion::start("C6", 10);
    let mut rng = ChaCha8Rng::seed_from_u64(0x6017_ab1e);
    let cases = 1_000;

    for _ in 0..cases {
        let truth_n = rng.random_range(0..15);
        let extracted_n = rng.random_range(0..15);
        let mut truth = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        while truth.len() < truth_n {
            let r = random_record(&mut rng);
            if seen.insert(r.key()) {
                truth.push(
                    GroundTruthEntry::new(r.compound, r.sample_id, r.interval, r.unit).unwrap(),
                );
            }
        }
        let extracted = dedupe_and_merge(
            (0..extracted_n).map(|_| random_record(&mut rng)).collect(),
            &MergeOptions::default(),
        );

        let matches = join_records(&extracted, &truth);
        let matched = matches
            .iter()
            .filter(|m| matches!(m.kind, MatchKind::Matched { .. }))
            .count();
        let missed = matches
            .iter()
            .filter(|m| matches!(m.kind, MatchKind::MissedTruth { .. }))
            .count();
        let false_pos = matches
            .iter()
            .filter(|m| matches!(m.kind, MatchKind::FalsePositive { .. }))
            .count();
        assert_eq!(matched + missed, truth.len(), "truth side not partitioned");
        assert_eq!(
            matched + false_pos,
            extracted.len(),
            "extracted side not partitioned"
        );
        assert_eq!(matches.len(), matched + missed + false_pos);

        // provided cells of the presence matrix are exactly the matched
        // (compound, sample) pairs
        let matrix = regolith_core::evaluate::recall_matrix(&matches);
        let mut provided_cells = std::collections::BTreeSet::new();
        for (row, compound) in matrix.compounds.iter().enumerate() {
            for (col, sample) in matrix.sample_ids.iter().enumerate() {
                if matrix.cells[row][col] == regolith_core::evaluate::CellState::Provided {
                    provided_cells.insert((compound.clone(), sample.clone()));
                }
            }
        }
        let matched_pairs: std::collections::BTreeSet<(String, String)> = matches
            .iter()
            .filter(|m| matches!(m.kind, MatchKind::Matched { .. }))
            .map(|m| (m.key.compound.clone(), m.key.sample_id.clone()))
            .collect();
        assert_eq!(provided_cells, matched_pairs, "matrix disagrees with join");

        // unit mismatch: exactly one miss plus one false positive
        let t = vec![GroundTruthEntry::new("MgO", "14321", iv(0.01, 0.02), Unit::Percent).unwrap()];
        let e = vec![CompositionRecord {
            compound: "MgO".to_owned(),
            sample_id: "14321".to_owned(),
            interval: iv(100.0, 200.0),
            unit: Unit::Ppm,
            provenance: vec![SourceRef {
                doc_id: "14321".to_owned(),
                chunk_index: 0,
            }],
            flags: Default::default(),
        }];
        let mismatch = join_records(&e, &t);
        assert_eq!(mismatch.len(), 2);
        assert_eq!(
            mismatch
                .iter()
                .filter(|m| matches!(m.kind, MatchKind::MissedTruth { .. }))
                .count(),
            1
        );
        assert_eq!(
            mismatch
                .iter()
                .filter(|m| matches!(m.kind, MatchKind::FalsePositive { .. }))
                .count(),
            1
        );
    }

    c.pass(&format!(
        "{cases} randomized joins: both partitions hold, unit mismatch = miss + false positive"
    ));
}

// ---- C7 -------------------------------------------------------------------

#[test]
fn criterion_7_frequency_discard_boundary() {
    let c = Criterion::start("C7", 1);
    let mut records = Vec::new();
    for i in 0..6 {
        let mut r = random_record(&mut ChaCha8Rng::seed_from_u64(i));
        r.compound = "SiO2".to_owned();
        records.push(r);
    }
    for i in 0..5 {
        let mut r = random_record(&mut ChaCha8Rng::seed_from_u64(100 + i));
        r.compound = "Xy".to_owned();
        records.push(r);
    }

    let report = compound_frequencies(&records, 5);
    assert_eq!(report.counts.get("SiO2"), Some(&6), "count 6 must be kept");
    assert!(
        !report.counts.contains_key("Xy"),
        "count 5 must not be kept"
    );
    assert_eq!(report.discarded.len(), 1);
    assert_eq!(report.discarded[0].compound, "Xy");
    assert_eq!(report.discarded[0].count, 5);

    c.pass("boundary holds: count 6 kept, count 5 discarded");
}

// ---- shared fixture machinery for C8/C9 ------------------------------------

const MODEL: &str = "gpt-4o";

fn binary() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_regolith"));
    // replay-only runs: no credentials, no endpoint
    cmd.env_remove("REGOLITH_API_KEY");
    cmd.env_remove("REGOLITH_API_BASE");
    cmd
}

/// Populates the replay cache with a canned response for one chunk.
fn cache_response(cache: &ReplayCache, chunk: &DocumentChunk, text: &str) {
    let builder = PromptBuilder::new(MODEL, 0.0).unwrap();
    let request = builder.extraction_prompt(chunk).unwrap();
    cache
        .store(
            &request,
            &CompletionResponse {
                text: text.to_owned(),
                prompt_tokens: 1000,
                completion_tokens: 100,
                from_cache: false,
            },
        )
        .unwrap();
}

fn single_chunk(doc_id: &str, text: &str) -> DocumentChunk {
    DocumentChunk {
        doc_id: doc_id.to_owned(),
        chunk_index: 0,
        page_span: (1, 1),
        text: text.to_owned(),
    }
}

fn run_extract_cmd(corpus: &Path, cache: &Path, out: &Path, chunk_chars: usize) {
    let output = binary()
        .args([
            "extract",
            "--corpus-dir",
            corpus.to_str().unwrap(),
            "--cache-dir",
            cache.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "--chunk-chars",
            &chunk_chars.to_string(),
            "--model",
            MODEL,
            "--temperature",
            "0",
            "--jobs",
            "4",
        ])
        .output()
        .expect("extract run");
    assert!(
        output.status.success(),
        "extract failed: {}\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

// ---- C8 -------------------------------------------------------------------

#[test]
fn criterion_8_replay_determinism() {
    let c = Criterion::start("C8", 30);
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let cache_dir = dir.path().join("cache");
    fs::create_dir_all(&corpus).unwrap();
    let cache = ReplayCache::open(&cache_dir).unwrap();

    // ten two-page documents, chunked at 200 chars so each page is a chunk
    let chunk_chars = 200;
    let compounds = ["SiO2", "FeO", "TiO2", "Al2O3", "MgO"];
    for i in 0..10 {
        let id = format!("{}", 10000 + i * 37);
        let page1 = format!("Sample {id} bulk composition, first analysis set. {}", "x".repeat(120));
        let page2 = format!("Sample {id} second analysis set. {}", "y".repeat(120));
        fs::write(
            corpus.join(format!("{id}.txt")),
            format!("{page1}\u{000c}{page2}"),
        )
        .unwrap();

        let doc = DocumentText::new(id.clone(), vec![page1, page2]).unwrap();
        let chunks = chunk_document(&doc, NonZeroUsize::new(chunk_chars).unwrap());
        assert_eq!(chunks.len(), 2, "fixture documents must split in two");
        let compound = compounds[i % compounds.len()];
        cache_response(
            &cache,
            &chunks[0],
            &format!(
                "Compound, SampleId, weight, units\n{compound}, {id}, {}.1-{}.5, percent,\nFeO, {id}, 16-17, percent",
                40 + i,
                42 + i
            ),
        );
        cache_response(
            &cache,
            &chunks[1],
            &format!(
                "Compound, SampleId, weight, units\n{compound}, {id}, {}.0-{}.9, percent",
                41 + i,
                42 + i
            ),
        );
    }

    let out1 = dir.path().join("out1");
    let out2 = dir.path().join("out2");
    run_extract_cmd(&corpus, &cache_dir, &out1, chunk_chars);
    run_extract_cmd(&corpus, &cache_dir, &out2, chunk_chars);

    let csv1 = fs::read(out1.join("records.csv")).unwrap();
    let csv2 = fs::read(out2.join("records.csv")).unwrap();
    assert_eq!(csv1, csv2, "records.csv differs between replay runs");
    let json1 = fs::read(out1.join("records.json")).unwrap();
    let json2 = fs::read(out2.join("records.json")).unwrap();
    assert_eq!(json1, json2, "records.json differs between replay runs");

    for out in [&out1, &out2] {
        let manifest: serde_json::Value =
            serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(
            manifest["cache"]["network_calls"], 0,
            "replay run must not touch the network"
        );
        assert_eq!(manifest["cache"]["hits"], 20);
        assert_eq!(manifest["documents"].as_array().unwrap().len(), 10);
    }

    // cross-chunk envelope: both chunks of each doc reported the same
    // compound, so the merged record carries two provenance sources
    let content = String::from_utf8(csv1).unwrap();
    let multi_source = content.lines().filter(|l| l.contains(';')).count();
    assert_eq!(multi_source, 10, "one merged record per document expected");

    c.pass("10-document corpus: zero network calls, byte-identical records across two runs");
}

// ---- C9 -------------------------------------------------------------------

#[test]
fn criterion_9_end_to_end_fixture() {
    let c = Criterion::start("C9", 30);
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let cache_dir = dir.path().join("cache");
    let out = dir.path().join("out");
    fs::create_dir_all(&corpus).unwrap();
    let cache = ReplayCache::open(&cache_dir).unwrap();

    let doc_10047 = "Sample 10047 composition tables, multiple studies.";
    let doc_15415 = "Sample 15415 ferroan anorthosite analyses.";
    let doc_14321 = "Sample 14321 breccia: granite clast and matrix analyses.";
    fs::write(corpus.join("10047.txt"), doc_10047).unwrap();
    fs::write(corpus.join("15415.txt"), doc_15415).unwrap();
    fs::write(corpus.join("14321.txt"), doc_14321).unwrap();

    // one response wrapped in markdown fences
    cache_response(
        &cache,
        &single_chunk("10047", doc_10047),
        "```\nCompound, SampleId, weight, units\nSiO2, 10047, 40.1-42.0, percent,\nTiO2, 10047, 9.0-9.5, percent\n```",
    );
    // one response with a single-value weight
    cache_response(
        &cache,
        &single_chunk("15415", doc_15415),
        "Compound, SampleId, weight, units\nFeO, 15415, 0.08-0.202, percent,\nAl2O3, 15415, 35.1, percent",
    );
    // one response with a phase-labeled sample id
    cache_response(
        &cache,
        &single_chunk("14321", doc_14321),
        "Compound, SampleId, weight, units\nSiO2, 14321 granite, 73.0-74.5, percent\nMgO, 14321, 100-200, ppm",
    );

    run_extract_cmd(&corpus, &cache_dir, &out, 25_000);

    let records_csv = fs::read_to_string(out.join("records.csv")).unwrap();
    let expected_records = "\
compound,sample_id,lo,hi,unit,flags,provenance
SiO2,10047,40.1,42,percent,,10047:0
TiO2,10047,9,9.5,percent,,10047:0
MgO,14321,100,200,ppm,,14321:0
SiO2,14321,73,74.5,percent,,14321:0
Al2O3,15415,35.1,35.1,percent,single-value-repaired,15415:0
FeO,15415,0.08,0.202,percent,,15415:0
";
    assert_eq!(records_csv, expected_records);

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["cache"]["network_calls"], 0);
    assert_eq!(manifest["sample_id_rewrites"], 1, "\"14321 granite\" repaired");

    let truth_path = dir.path().join("truth.csv");
    fs::write(
        &truth_path,
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

    let output = binary()
        .args([
            "evaluate",
            "--records",
            out.join("records.csv").to_str().unwrap(),
            "--truth",
            truth_path.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ])
        .output()
        .expect("evaluate run");
    assert!(
        output.status.success(),
        "evaluate failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        stdout.contains("matched 5, missed 2, false positives 1"),
        "unexpected evaluate summary: {stdout}"
    );

    // hand-computed metrics table (oracle values frozen before the
    // implementation: midpoints via (lo+hi)/2, overlaps by clamping)
    let metrics_csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let rows: Vec<&str> = metrics_csv.lines().collect();
    assert_eq!(
        rows[0],
        "sample_id,compound,unit,abs_err,rel_err,rel_err_flag,precision,recall"
    );
    assert_eq!(rows.len(), 6, "five matched rows expected: {metrics_csv}");

    struct Expected {
        key: &'static str,
        abs: f64,
        rel: f64,
        flagged: bool,
        precision: f64,
        recall: f64,
    }
    let expected = [
        Expected {
            key: "10047,SiO2,percent",
            abs: 0.04999999999999716,
            rel: 0.12165450121653812,
            flagged: false,
            precision: 0.8421052631578961,
            recall: 1.0,
        },
        Expected {
            key: "10047,TiO2,percent",
            abs: 0.09999999999999964,
            rel: 1.0695187165775364,
            flagged: false,
            precision: 0.8000000000000007,
            recall: 0.8000000000000007,
        },
        Expected {
            key: "14321,SiO2,percent",
            abs: 0.25,
            rel: 0.3401360544217687,
            flagged: false,
            precision: 1.0,
            recall: 0.5,
        },
        Expected {
            key: "15415,Al2O3,percent",
            abs: 0.10000000000000142,
            rel: 0.28571428571428975,
            flagged: false,
            precision: 1.0,
            recall: 0.0,
        },
        Expected {
            key: "15415,FeO,percent",
            abs: 0.0595,
            rel: 29.675810473815456,
            flagged: true,
            precision: 0.02459016393442625,
            recall: 1.0,
        },
    ];
    for (row, want) in rows[1..].iter().zip(&expected) {
        let fields: Vec<&str> = row.split(',').collect();
        let key = format!("{},{},{}", fields[0], fields[1], fields[2]);
        assert_eq!(key, want.key);
        let abs: f64 = fields[3].parse().unwrap();
        let rel: f64 = fields[4].parse().unwrap();
        let flagged = fields[5] == "true";
        let precision: f64 = fields[6].parse().unwrap();
        let recall: f64 = fields[7].parse().unwrap();
        assert!((abs - want.abs).abs() <= 1e-12, "{key} abs {abs}");
        assert!((rel - want.rel).abs() <= 1e-12, "{key} rel {rel}");
        assert_eq!(flagged, want.flagged, "{key} rel_err_flag");
        assert!(
            (precision - want.precision).abs() <= 1e-12,
            "{key} precision {precision}"
        );
        assert!((recall - want.recall).abs() <= 1e-12, "{key} recall {recall}");
    }

    let matrix_csv = fs::read_to_string(out.join("recall_matrix.csv")).unwrap();
    let expected_matrix = "\
compound,10047,14321,15415
Al2O3,not-truthed,not-truthed,provided
FeO,not-truthed,not-truthed,provided
MgO,not-truthed,missed,not-truthed
S,not-truthed,missed,not-truthed
SiO2,provided,provided,not-truthed
TiO2,provided,not-truthed,not-truthed
";
    assert_eq!(matrix_csv, expected_matrix);

    c.pass("3-document corpus through extract + evaluate reproduces the hand-computed tables");
}

//! The analysis-and-repair stage: canonicalize compounds, units, and sample
//! ids, quarantine rows that cannot be repaired, and merge per-chunk
//! results into per-document records.
//!
//! Merging uses envelope semantics: conflicting intervals for the same
//! (sample, compound, unit) key collapse to the smallest interval covering
//! all of them, with every source retained in provenance. Composition is
//! represented as the range between the minimum and maximum reported value,
//! so the envelope is the faithful aggregate of partial views.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::Interval;
use crate::parse::{parse_weight, RawRecord, RowProvenance, WeightParseError};

/// Measurement unit of a composition value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Percent,
    Ppm,
    Ppb,
}

impl Unit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unit::Percent => "percent",
            Unit::Ppm => "ppm",
            Unit::Ppb => "ppb",
        }
    }

    pub const ALL: [Unit; 3] = [Unit::Percent, Unit::Ppm, Unit::Ppb];
}

impl core::fmt::Display for Unit {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Repairs and caveats attached to a record on its way through the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairFlag {
    /// A single value was reported and widened to a degenerate interval.
    SingleValueRepaired,
    /// Interval bounds arrived reversed and were swapped.
    BoundsSwapped,
    /// An upper-bound inequality was read as `[0, bound]`.
    Inequality,
    /// Compound name is not a known oxide or element symbol.
    SuspectCompound,
    /// Envelope merge spanned inputs far apart relative to their lengths.
    WideMerge,
}

impl RepairFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RepairFlag::SingleValueRepaired => "single-value-repaired",
            RepairFlag::BoundsSwapped => "bounds-swapped",
            RepairFlag::Inequality => "inequality",
            RepairFlag::SuspectCompound => "suspect-compound",
            RepairFlag::WideMerge => "wide-merge",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "single-value-repaired" => Some(RepairFlag::SingleValueRepaired),
            "bounds-swapped" => Some(RepairFlag::BoundsSwapped),
            "inequality" => Some(RepairFlag::Inequality),
            "suspect-compound" => Some(RepairFlag::SuspectCompound),
            "wide-merge" => Some(RepairFlag::WideMerge),
            _ => None,
        }
    }
}

/// One contributing (document, chunk) source of a record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceRef {
    pub doc_id: String,
    pub chunk_index: usize,
}

/// Join key of a normalized record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct RecordKey {
    pub sample_id: String,
    pub compound: String,
    pub unit: Unit,
}

impl RecordKey {
    pub fn new(sample_id: impl Into<String>, compound: impl Into<String>, unit: Unit) -> Self {
        Self {
            sample_id: sample_id.into(),
            compound: compound.into(),
            unit,
        }
    }
}

/// Sample ids are digit strings; ordering by (length, lexicographic) sorts
/// them numerically without parsing.
pub fn sample_id_cmp(a: &str, b: &str) -> Ordering {
    (a.len(), a).cmp(&(b.len(), b))
}

impl Ord for RecordKey {
    fn cmp(&self, other: &Self) -> Ordering {
        sample_id_cmp(&self.sample_id, &other.sample_id)
            .then_with(|| self.compound.cmp(&other.compound))
            .then_with(|| self.unit.cmp(&other.unit))
    }
}

impl PartialOrd for RecordKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl core::fmt::Display for RecordKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}/{}/{}", self.sample_id, self.compound, self.unit)
    }
}

/// A normalized composition record: the pipeline's central data type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionRecord {
    pub compound: String,
    /// Digits-only sample identifier.
    pub sample_id: String,
    pub interval: Interval,
    pub unit: Unit,
    /// Every (document, chunk) that contributed; non-empty, sorted, deduped.
    pub provenance: Vec<SourceRef>,
    pub flags: BTreeSet<RepairFlag>,
}

impl CompositionRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey::new(self.sample_id.clone(), self.compound.clone(), self.unit)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("sample id {0:?} contains no digits")]
    UnidentifiableSample(String),
    #[error("unrecognized unit {0:?}")]
    UnknownUnit(String),
    #[error(transparent)]
    Weight(#[from] WeightParseError),
    #[error("empty {0} field")]
    EmptyField(&'static str),
    #[error("compound {0:?} contains characters reserved by the record format")]
    InvalidCompound(String),
}

/// Sample id with its pre-normalization spelling preserved for audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleId {
    pub canonical: String,
    pub original: String,
}

/// Strips all non-digit characters from a sample id ("14321 (granite
/// clast)" becomes "14321"). A value with no digits at all cannot be
/// attributed to a sample and is an error.
pub fn normalize_sample_id(raw: &str) -> Result<SampleId, NormalizeError> {
    let original = raw.trim();
    if original.is_empty() {
        return Err(NormalizeError::EmptyField("sample id"));
    }
    let canonical: String = original.chars().filter(|c| c.is_ascii_digit()).collect();
    if canonical.is_empty() {
        return Err(NormalizeError::UnidentifiableSample(original.to_owned()));
    }
    Ok(SampleId {
        canonical,
        original: original.to_owned(),
    })
}

/// Case-insensitive mapping of unit spellings seen in the wild.
pub fn normalize_unit(raw: &str) -> Result<Unit, NormalizeError> {
    let folded = raw.trim().to_ascii_lowercase();
    match folded.as_str() {
        "percent" | "%" | "wt%" | "wt.%" => Ok(Unit::Percent),
        "ppm" => Ok(Unit::Ppm),
        "ppb" => Ok(Unit::Ppb),
        _ => Err(NormalizeError::UnknownUnit(raw.trim().to_owned())),
    }
}

/// Oxides commonly reported in sample analyses plus every element symbol.
/// Compounds outside this table (mineral names like "Plagioclase") pass
/// through verbatim but are flagged suspect rather than rejected, keeping
/// them visible in downstream analytics.
const KNOWN_COMPOUNDS: &[&str] = &[
    // oxides
    "SiO2", "TiO2", "Al2O3", "Cr2O3", "Fe2O3", "FeO", "MnO", "MgO", "CaO", "Na2O", "K2O", "P2O5",
    "SO3", "NiO", "CoO", "BaO", "SrO", "ZrO2", "V2O5", "Li2O", "Rb2O", "Cs2O", "H2O", "CO2",
    // element symbols
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn",
    "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
];

/// Normalizes case and subscript variants of known oxides and element
/// symbols ("sio2" and "SiO₂" both become "SiO2"). Returns the canonical
/// spelling and whether the name is suspect (not in the table).
pub fn canonicalize_compound(raw: &str) -> (String, bool) {
    let trimmed = raw.trim();
    let folded: String = trimmed.chars().map(fold_subscript_digit).collect();
    for known in KNOWN_COMPOUNDS {
        if known.eq_ignore_ascii_case(&folded) {
            return ((*known).to_owned(), false);
        }
    }
    (trimmed.to_owned(), true)
}

fn fold_subscript_digit(c: char) -> char {
    match c {
        '\u{2080}'..='\u{2089}' => {
            char::from_u32('0' as u32 + (c as u32 - '\u{2080}' as u32)).unwrap_or(c)
        }
        _ => c,
    }
}

/// A raw record the repair stage refused, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizeIssue {
    pub provenance: RowProvenance,
    pub row: String,
    pub reason: NormalizeError,
}

/// Result of normalizing a batch of raw rows. `sample_id_rewrites` counts
/// rows whose sample id needed non-digit content stripped.
#[derive(Debug, Clone, Default)]
pub struct NormalizeOutcome {
    pub records: Vec<CompositionRecord>,
    pub issues: Vec<NormalizeIssue>,
    pub sample_id_rewrites: usize,
}

/// Normalizes one raw row into a pre-merge record.
pub fn normalize_record(raw: &RawRecord) -> Result<CompositionRecord, NormalizeError> {
    if raw.compound_raw.trim().is_empty() {
        return Err(NormalizeError::EmptyField("compound"));
    }
    let (compound, suspect) = canonicalize_compound(&raw.compound_raw);
    // commas, semicolons, and newlines are delimiters in the persisted
    // record format; a "compound" carrying them is noise anyway
    if compound.contains([',', ';', '\n', '\r']) {
        return Err(NormalizeError::InvalidCompound(compound));
    }
    let sample = normalize_sample_id(&raw.sample_raw)?;
    let weight = parse_weight(&raw.weight_raw)?;
    let unit = normalize_unit(&raw.unit_raw)?;

    let mut flags = BTreeSet::new();
    if suspect {
        flags.insert(RepairFlag::SuspectCompound);
    }
    if weight.single_value {
        flags.insert(RepairFlag::SingleValueRepaired);
    }
    if weight.swapped_bounds {
        flags.insert(RepairFlag::BoundsSwapped);
    }
    if weight.inequality {
        flags.insert(RepairFlag::Inequality);
    }

    Ok(CompositionRecord {
        compound,
        sample_id: sample.canonical,
        interval: weight.interval,
        unit,
        provenance: alloc::vec![SourceRef {
            doc_id: raw.provenance.doc_id.clone(),
            chunk_index: raw.provenance.chunk_index,
        }],
        flags,
    })
}

/// Normalizes a batch, quarantining rows that cannot be repaired.
pub fn normalize_records(raws: &[RawRecord]) -> NormalizeOutcome {
    let mut outcome = NormalizeOutcome::default();
    for raw in raws {
        match normalize_record(raw) {
            Ok(record) => {
                if record.sample_id != raw.sample_raw.trim() {
                    outcome.sample_id_rewrites += 1;
                }
                outcome.records.push(record);
            }
            Err(reason) => outcome.issues.push(NormalizeIssue {
                provenance: raw.provenance.clone(),
                row: raw.to_csv_row(),
                reason,
            }),
        }
    }
    outcome
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeOptions {
    /// A merged envelope longer than this multiple of its longest input is
    /// flagged [`RepairFlag::WideMerge`] for human review.
    pub wide_merge_multiple: f64,
}

impl Default for MergeOptions {
    fn default() -> Self {
        Self {
            wide_merge_multiple: 5.0,
        }
    }
}

/// Groups records by (sample, compound, unit), collapses duplicates, and
/// merges conflicting intervals to their envelope with provenance and flags
/// unioned. Output is sorted by key and has unique keys.
pub fn dedupe_and_merge(
    records: Vec<CompositionRecord>,
    options: &MergeOptions,
) -> Vec<CompositionRecord> {
    let mut groups: BTreeMap<RecordKey, Vec<CompositionRecord>> = BTreeMap::new();
    for record in records {
        groups.entry(record.key()).or_default().push(record);
    }
    groups
        .into_iter()
        .map(|(key, members)| merge_group(key, members, options))
        .collect()
}

fn merge_group(
    key: RecordKey,
    members: Vec<CompositionRecord>,
    options: &MergeOptions,
) -> CompositionRecord {
    let mut envelope = members[0].interval;
    let mut longest_input = members[0].interval.length();
    let mut provenance = BTreeSet::new();
    let mut flags = BTreeSet::new();
    for member in &members {
        envelope = envelope.envelope(&member.interval);
        longest_input = longest_input.max(member.interval.length());
        provenance.extend(member.provenance.iter().cloned());
        flags.extend(member.flags.iter().copied());
    }
    if envelope.length() > options.wide_merge_multiple * longest_input {
        flags.insert(RepairFlag::WideMerge);
    }
    CompositionRecord {
        compound: key.compound,
        sample_id: key.sample_id,
        interval: envelope,
        unit: key.unit,
        provenance: provenance.into_iter().collect(),
        flags,
    }
}

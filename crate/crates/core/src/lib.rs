//! Surveillance toolkit for probable healthcare-associated infections (HAI).
//!
//! The pipeline runs from messy microbiology lab exports to an
//! under-reporting estimate:
//!
//! 1. [`dictionary`]: canonical antibiotic vocabulary for token resolution
//! 2. [`lab`]: lab CSV parsing into normalized isolate records
//! 3. [`markers`]: sentinel-marker detection (MRSA, ceftazidime
//!    resistance), legacy substring mode, adjudication, summaries
//! 4. [`registry`]: hospital monthly report ingestion, cross-validation,
//!    aggregation, completeness
//! 5. [`stats`]: reported vs expected vs marker-based comparison
//! 6. [`corpus`]: seeded synthetic corpora with planted ground truth
//!
//! The `haiscan` binary wires these together; see [`cli`].

pub mod cli;
pub mod corpus;
pub mod dictionary;
pub mod lab;
pub mod markers;
pub mod period;
pub mod registry;
pub mod stats;

pub use corpus::{generate_corpus, Corpus, CorpusSpec, GroundTruth, PlantedCounts};
pub use dictionary::{builtin_default, load_dictionary, Dictionary, Resolution};
pub use lab::{
    filter_period, parse_lab_export, IsolateRecord, LabRow, ParseDiagnostics, ParseOutput,
    Strictness,
};
pub use markers::{
    apply_adjudication, detect_all, detect_caz, detect_mrsa, legacy_substring_scan,
    resistance_proportion, summarize, AdjudicationFile, Marker, MarkerFinding, MarkerSummary,
};
pub use period::{Month, Period};
pub use registry::{
    aggregate, completeness, concentration, cross_validate, ingest_reports, AggregateMatrix,
    AggregationMode, CompletenessReport, Registry,
};
pub use stats::{
    build_estimate, default_reference_rates, expected_hai, expected_range, rate_per_100,
    underreporting_ratio, Estimate, HospitalProfile, RatePer100, ReferenceRate, Scope,
};

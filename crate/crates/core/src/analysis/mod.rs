//! Spectral-semantic analysis, decode traces, and the dump interchange format.

pub mod dump;
pub mod profile;
pub mod trace;

use thiserror::Error;

pub use dump::{read_dump, write_dump, DumpError, DumpFile, DumpHeader, DumpStep};
pub use profile::{
    block_low_freq_ratio, group_stats, low_freq_ratio, parse_labels, spectral_profiles,
    top_k_profiles, CategoryStats, FreqGroup, LowFreqRatios, TokenSpectralProfile,
};
pub use trace::{export_trace, parse_csv, parse_json, TraceFormat, TraceRecord};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no category label for position {0}")]
    MissingLabel(usize),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown trace format `{0}` (expected csv, json or svg)")]
    UnknownFormat(String),
    #[error("trace is empty")]
    EmptyTrace,
}

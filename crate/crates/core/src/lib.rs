//! Size-aware validation of ML object-recognition rankings.
//!
//! Depth crops are turned into metric box dimensions, quantized into
//! qualitative size bins, and checked against a catalogue of typical class
//! sizes to drop implausible classes from a ranking.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod eval;
pub mod geometry;
pub mod ingest;
pub mod kb;
pub mod quantize;
pub mod reasoner;
pub mod synth;

use thiserror::Error;

/// Any failure of the pipeline, as surfaced to front ends.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Kb(#[from] kb::KbError),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Quantize(#[from] quantize::QuantizeError),
    #[error(transparent)]
    Reasoner(#[from] reasoner::ReasonerError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Kb(_) => "knowledge_base",
            Error::Ingest(_) => "ingest",
            Error::Geometry(_) => "geometry",
            Error::Quantize(_) => "quantize",
            Error::Reasoner(_) => "reasoner",
            Error::Eval(_) => "eval",
            Error::Synth(_) => "synth",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit code; 1 and 2 are left to panics and usage errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 3,
            Error::Kb(_) => 4,
            Error::Ingest(_) => 5,
            Error::Geometry(_) => 6,
            Error::Quantize(_) => 7,
            Error::Reasoner(_) => 8,
            Error::Eval(_) => 9,
            Error::Synth(_) => 10,
            Error::Io { .. } => 11,
        }
    }
}

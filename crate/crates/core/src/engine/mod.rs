//! Run orchestration: analyze pipeline, run modes, worker pool, time budget
//! and the benchmark harness.

pub mod analyze;
pub mod bench;
pub mod budget;
pub mod config;
pub mod pool;

pub use analyze::{
    analyze_bytes, check_overwrite_strings, Analysis, AnalyzeSettings, ProcessingChoice, Stats, Timings,
    DEFAULT_CHUNK_PAGES,
};
pub use budget::{BudgetParams, BudgetState, Sample, Transition};
pub use config::{run, EngineConfig, RunMode, RunSummary};
pub use pool::{run_parallel, WorkerPanic};

use crate::dumpgen::GenError;
use crate::kb::KbError;
use crate::keys::KeyError;
use crate::parser::ParseError;
use crate::redactor::RedactError;
use crate::report::ReportError;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("config: {0}")]
    Config(String),
    #[error("parse: {0}")]
    Parse(#[from] ParseError),
    #[error("knowledge base: {0}")]
    Kb(#[from] KbError),
    #[error("redact: {0}")]
    Redact(#[from] RedactError),
    #[error("report: {0}")]
    Report(#[from] ReportError),
    #[error("key: {0}")]
    Key(#[from] KeyError),
    #[error("generate: {0}")]
    Gen(#[from] GenError),
    #[error("classify: {0}")]
    Worker(#[from] WorkerPanic),
    #[error("io on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl EngineError {
    /// Process exit status: 1 configuration, 2 input parse, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            EngineError::Config(_) | EngineError::Kb(_) | EngineError::Key(_) => 1,
            EngineError::Gen(GenError::Invalid { .. }) => 1,
            EngineError::Parse(_) => 2,
            EngineError::Redact(_)
            | EngineError::Report(_)
            | EngineError::Gen(_)
            | EngineError::Worker(_)
            | EngineError::Io { .. } => 3,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        EngineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

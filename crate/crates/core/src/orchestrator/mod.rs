//! Experiment engine: configuration, the optimization loop, run logs, reports.

mod config;
mod report;
mod run;
mod runlog;
mod seed;

use thiserror::Error;

use crate::llm::LlmError;

pub use config::{
    AcquisitionSection, EvaluatorSection, ExperimentConfig, InitStrategy, Method, RunConfig, RunSection, SurrogateSection,
};
pub use report::{convergence_csv, method_label, report, verify_replay};
pub use run::{best_so_far, run};
pub use runlog::{
    GpDiagnostics, Header, IterationLine, LogLine, Outcome, RecordLine, RunLog, SummaryLine, TranscriptLine,
};
pub use seed::{derive_seed, stream};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("LLM: {0}")]
    Llm(LlmError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("run log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("I/O: {0}")]
    Io(String),
}

impl RunError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Log { .. } | RunError::Io(_) => 2,
            RunError::Llm(_) => 3,
            RunError::Numerical(_) => 4,
        }
    }
}

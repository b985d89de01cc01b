//! Command implementations behind the `netfx` binary.
//!
//! Each command reads its inputs, runs the core pipeline and writes plain
//! CSV/JSON artifacts into an output directory. Errors are split into
//! configuration problems (exit code 2) and failures raised by the analysis
//! itself (exit code 1).

pub mod commands;
pub mod config;

pub use commands::{
    analyze, cohort, curve, driver_symbols, synth, AnalyzeReport, CohortReport, CurveReport,
    SynthReport,
};
pub use config::AnalysisConfig;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Module(#[from] anyhow::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            CommandError::Module(_) => 1,
        }
    }
}

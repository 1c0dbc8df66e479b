//! Configuration-driven runner for the teleportation simulator, the count
//! analysis and the hole-array design sweep. Every command writes plain
//! JSON and CSV files into the output directory; reruns with the same
//! configuration produce byte-identical files.

mod analyze;
mod config;
mod design;
mod output;
mod simulate;

pub use analyze::{cmd_analyze, AnalysisEntry, AnalyzeReport};
pub use config::{AnalyzeConfig, ChannelConfig, ChannelPreset, DesignConfig, Mode, RunConfig, TomographyConfig};
pub use design::{cmd_design, DesignPoint, DesignReport};
pub use simulate::{cmd_simulate, SimulateReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    pub(crate) fn config(e: spp_teleport::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub(crate) fn data(e: spp_teleport::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Runs one command for an already validated configuration.
pub fn run(mode: Mode, config: &RunConfig) -> Result<String, CliError> {
    config.validate(mode)?;
    match mode {
        Mode::Simulate => cmd_simulate(config).map(|r| r.describe()),
        Mode::Analyze => cmd_analyze(config).map(|r| r.describe()),
        Mode::Design => cmd_design(config).map(|r| r.describe()),
    }
}

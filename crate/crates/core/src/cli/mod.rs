//! Operator surface: config loading, scenario runs, benchmarks and report
//! re-rendering, each writing its artifacts into one output directory.

mod config;
mod run;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::bench::BenchError;
use crate::scenario::ScenarioError;

pub use self::config::{
    load_config, parse_config, CryptoConfig, DeviceSection, FramingName, ModelsSection, RawConfig, ScenarioConfig,
    ServerSection, TopologyConfig,
};
pub use self::run::{
    bench, render_saved, report, run, BenchSummary, RejectionCounts, RunCounts, RunSummary, PRESET_FILE, SAMPLES_FILE,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Scenario(ScenarioError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// 0 success, 1 configuration or input problem, 2 runtime invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => 1,
            CliError::Scenario(ScenarioError::Topology(_)) => 1,
            CliError::Bench(BenchError::Config(_) | BenchError::Preset(_)) => 1,
            CliError::Bench(BenchError::Samples(_) | BenchError::EmptySamples) => 1,
            CliError::Invariant(_) | CliError::Scenario(_) => 2,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Invariant(msg) => CliError::Invariant(msg),
            other => CliError::Scenario(other),
        }
    }
}

/// Bundled scenario configs, by name.
pub const FIXTURES: [(&str, &str); 5] = [
    ("paper-plain-passive", include_str!("../../fixtures/paper-plain-passive.json")),
    ("paper-plain-active", include_str!("../../fixtures/paper-plain-active.json")),
    ("paper-encrypted-passive", include_str!("../../fixtures/paper-encrypted-passive.json")),
    ("paper-encrypted-active", include_str!("../../fixtures/paper-encrypted-active.json")),
    ("bench-paper", include_str!("../../fixtures/bench-paper.json")),
];

/// Looks up a bundled config by name, with or without a `.json` suffix.
pub fn fixture(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Output directory: explicit flag, then the config, then `out/<run id>`.
pub fn output_dir(flag: Option<PathBuf>, config: &ScenarioConfig) -> PathBuf {
    flag.or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(config.run_id()))
}

//! Latency, reliability and resource comparison of plain and encrypted
//! telemetry.
//!
//! Latencies come from an additive cost model replayed over the real wire
//! encodings: each message is built exactly as the device would send it,
//! its byte and cipher-block counts feed the model, and a loss model with
//! retransmission decides delivery. All parameters live in one preset file.

mod model;
mod render;
mod run;
mod stats;

use thiserror::Error;

pub use self::model::{
    draw_latency, BenchPreset, LatencyModel, NetworkDelay, PerMode, ResourcePreset, RetryPolicy,
};
pub use self::render::{
    render_report, ReportFormat, LATENCY_HEADER, LATENCY_TITLE, RELIABILITY_HEADER, RELIABILITY_TITLE,
    RESOURCE_HEADER, RESOURCE_TITLE,
};
pub use self::run::{
    pct_increase, read_samples, report_from_samples, run_bench, run_mode, summarize, write_samples, BenchParams,
    BenchReport, LatencySample, ModeSummary,
};
pub use self::stats::{latency_stats, LatencyStats};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("bench config: {0}")]
    Config(String),
    #[error("bench preset: {0}")]
    Preset(String),
    #[error("no samples")]
    EmptySamples,
    #[error("samples file: {0}")]
    Samples(String),
}

//! ARP-spoofing man-in-the-middle: reconnaissance, poisoning, passive
//! interception, active tampering and impact assessment.

mod engine;
mod impact;
mod plan;

use thiserror::Error;

use crate::netsim::NetError;

pub use self::engine::{Attacker, TrafficProfile};
pub use self::impact::{
    assess, Direction, ImpactCounts, ImpactReport, ImpactRow, InterceptEntry, InterceptLog, ServerLogView,
};
pub use self::plan::{AttackPlan, Phase, TamperAction, TamperRule, TamperTarget};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error("attack plan: {0}")]
    Plan(String),
    #[error("run id mismatch: intercept log from {intercept}, server log from {server}")]
    RunMismatch { intercept: String, server: String },
    #[error(transparent)]
    Net(#[from] NetError),
}

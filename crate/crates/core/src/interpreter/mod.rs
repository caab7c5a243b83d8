//! Reference simulators for block models and SDF graphs.

mod compare;
mod mil;
mod sil;
mod trace;

use thiserror::Error;

use crate::model::TraceError;

pub use compare::{close, compare_traces, CompareReport, Divergence, ShapeError};
pub use mil::{run_mil, stimulus, MilEngine, Plan, PlanGroup, PlanNode, PlanStep};
pub use sil::{run_sil, SilEngine};
pub use trace::{format_g17, format_time, format_value, Signal, Trace, TraceParseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("algebraic loop through {}", .0.join(", "))]
    AlgebraicLoop(Vec<String>),
    #[error("channel {channel} underflows when {actor} fires")]
    Underflow { channel: String, actor: String },
    #[error("{0} has no usable period")]
    NoPeriod(String),
    #[error("{0}: {1}")]
    Unsupported(String, String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

//! Scenario harness: configuration, closed-loop episodes, Monte-Carlo
//! batches and output files.

mod config;
mod emit;
mod episode;
mod montecarlo;
mod planner;

use thiserror::Error;

use crate::fcu::FcuError;
use crate::mdp::GridError;
use crate::rau::RauError;
use crate::risk_q::RiskError;
use crate::vehicle::VehicleError;

pub use config::{
    load_config, parse_config, EgoConfig, EntropicConfig, FcuConfig, GridConfig, ParticipantConfig, RiskConfig,
    SamplingConfig, ScenarioConfig, TransitionConfig, CONFIG_VERSION, HIGHWAY_OVERTAKE, REQUIRED_KEYS,
};
pub use emit::{
    episode_info, events_csv, trace_csv, write_batch, write_episode, write_plans, EpisodeInfo, EVENTS_HEADER,
    SUMMARY_FIELDS, TRACE_HEADER,
};
pub use episode::{collision_at, run_episode, Episode, Event, TraceRecord, Violation};
pub use montecarlo::{monte_carlo, quantile_sorted, run_batch, summarize, RunSummary};
pub use planner::{Epoch, Plan, Scenario};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot read config {path}: {message}")]
    ConfigIo { path: String, message: String },
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("config is missing required fields: {}", .0.join(", "))]
    MissingFields(Vec<String>),
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Rau(#[from] RauError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error(transparent)]
    Fcu(#[from] FcuError),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

impl SimError {
    /// Process exit status: 2 for configuration problems, 4 for solver
    /// failures, 1 for output errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::ConfigIo { .. }
            | SimError::Parse { .. }
            | SimError::MissingFields(_)
            | SimError::Invalid { .. }
            | SimError::Grid(_)
            | SimError::Rau(_)
            | SimError::Fcu(FcuError::BadClocks(_))
            | SimError::Vehicle(VehicleError::BadParams(_)) => 2,
            SimError::Risk(RiskError::Io { .. }) | SimError::Io { .. } => 1,
            SimError::Risk(_) | SimError::Vehicle(_) | SimError::Fcu(_) => 4,
        }
    }
}

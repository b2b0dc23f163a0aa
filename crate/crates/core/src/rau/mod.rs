//! Risk assessment: occupancy forecasting, per-cell safety classification
//! and the previewed reward model.

mod classify;
mod occupancy;
mod reward;
mod truncexp;

use thiserror::Error;

use crate::mdp::CellId;

pub use classify::{
    any_goal_candidates, banded_states, classify, classify_with_goal_fallback, lane_goal_candidates, RiskField,
    RiskThresholds,
};
pub use occupancy::{predict_occupancy, OccupancyForecast, ParticipantState};
pub use reward::{build_reward_model, sample_reward, RewardDistribution, RewardModel, RewardParams};
pub use truncexp::TruncExpParams;

#[derive(Debug, Error, PartialEq)]
pub enum RauError {
    #[error("invalid participant: {0}")]
    BadParticipant(String),
    #[error("invalid forecast request: {0}")]
    BadForecast(String),
    #[error("thresholds must satisfy 1 >= p_un > p_hr > p_lr > 0, got {0:?}")]
    BadThresholds(RiskThresholds),
    #[error("invalid truncated exponential parameters {0:?}")]
    BadTruncExp(TruncExpParams),
    #[error("invalid reward parameters: {0}")]
    BadParams(String),
    #[error("non-finite input {0}")]
    NonFinite(f64),
    #[error("cell {0} is outside the grid")]
    OutOfBounds(CellId),
    #[error("forecast, field and grid dimensions disagree")]
    GeometryMismatch,
}

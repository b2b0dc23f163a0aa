//! Feasibility monitoring: reach tubes against the risky set, the
//! env/pl/rpl scheduling automaton and the safety-mode override.

mod automaton;
mod safety;
mod tube;

use thiserror::Error;

use crate::mdp::CellId;
use crate::vehicle::VehicleError;

pub use automaton::{step_automaton, ClockTicks, Clocks, Delta, HybridState, Label, Timers};
pub use safety::{safety_mode, SafetyTiming};
pub use tube::{
    check_feasible, reach_tube, road_cell, road_cell_bounds, road_col, Feasibility, ReachTube, RiskSet,
};

#[derive(Debug, Error, PartialEq)]
pub enum FcuError {
    #[error("invalid clock configuration: {0}")]
    BadClocks(String),
    #[error("invalid reach tube request: {0}")]
    BadTube(String),
    #[error("no safe override: the ego row and both neighbors are risky ahead of {cell}")]
    NoSafeOverride { cell: CellId },
    #[error(transparent)]
    Reference(#[from] VehicleError),
}

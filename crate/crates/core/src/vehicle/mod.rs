//! Lateral single-track vehicle model, LQR tracking and reference paths.

mod lqr;
mod model;
mod reference;
mod sim;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lqr::{riccati_residual, solve_lqr, LqrGain};
pub use model::{dynamics, EgoState, VehicleParams};
pub use reference::{track, tracking_error, waypoints_to_reference, ReferenceTrajectory};
pub use sim::{integrate, Actuator, Rk4, TracePoint, STEER_LIMIT};

#[derive(Debug, Error, PartialEq)]
pub enum VehicleError {
    #[error("invalid vehicle parameter: {0}")]
    BadParams(String),
    #[error("no stabilizing gain exists for this system")]
    Unstabilizable,
    #[error("Riccati iteration stalled with residual {residual}")]
    NoConvergence { residual: f64 },
    #[error("integration step {dt} must be positive and below the duration {duration}")]
    BadStep { dt: f64, duration: f64 },
    #[error("invalid reference: {0}")]
    BadReference(String),
}

/// Diagonal state weights and input weight of the tracking cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LqrWeights {
    pub q_diag: [f64; 4],
    pub r: f64,
}

impl Default for LqrWeights {
    fn default() -> Self {
        LqrWeights {
            q_diag: [3.0, 1.0, 1.0, 1.0],
            r: 1.0,
        }
    }
}

/// LQR gain for the lateral model over `[Y - Y_p, Ψ, α_T, Ψ̇]`.
pub fn solve_vehicle_lqr(p: &VehicleParams, w: &LqrWeights) -> Result<LqrGain, VehicleError> {
    p.validate()?;
    let (am, bm) = p.system();
    let a = DMatrix::from_iterator(4, 4, am.iter().copied());
    let b = DMatrix::from_iterator(4, 1, bm.iter().copied());
    let q = DMatrix::from_diagonal(&DVector::from_row_slice(&w.q_diag));
    solve_lqr(&a, &b, &q, w.r)
}

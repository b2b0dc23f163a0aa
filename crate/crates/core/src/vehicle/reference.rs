use nalgebra::Vector4;

use super::{EgoState, LqrGain, VehicleError};
use crate::mdp::{CellId, GridGeometry};

/// Planned path: `x` advances at constant speed, `y` passes through one
/// ordinate per knot with a zero-slope cubic between consecutive knots.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    t0: f64,
    x0: f64,
    v: f64,
    step: f64,
    ys: Vec<f64>,
}

/// `3u² - 2u³`, the cubic with zero slope at both ends.
fn smoothstep(u: f64) -> f64 {
    u * u * (3.0 - 2.0 * u)
}

impl ReferenceTrajectory {
    /// Knots at `t0 + k·step` with ordinates `ys`.
    pub fn new(t0: f64, x0: f64, v: f64, step: f64, ys: Vec<f64>) -> Result<Self, VehicleError> {
        if ys.is_empty() {
            return Err(VehicleError::BadReference("no waypoints".into()));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(VehicleError::BadReference(format!("knot spacing {step} must be positive")));
        }
        if !(v > 0.0) {
            return Err(VehicleError::BadReference(format!("speed {v} must be positive")));
        }
        Ok(ReferenceTrajectory { t0, x0, v, step, ys })
    }

    /// Lane keeping at ordinate `y` for `duration` seconds.
    pub fn constant(t0: f64, x0: f64, v: f64, y: f64, duration: f64) -> Result<Self, VehicleError> {
        Self::new(t0, x0, v, duration.max(f64::MIN_POSITIVE), vec![y, y])
    }

    pub fn start_time(&self) -> f64 {
        self.t0
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + self.step * (self.ys.len() - 1) as f64
    }

    pub fn knot_spacing(&self) -> f64 {
        self.step
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ys
    }

    pub fn x_at(&self, t: f64) -> f64 {
        self.x0 + self.v * (t - self.t0)
    }

    /// `y` at time `t`; constant beyond either end.
    pub fn y_at(&self, t: f64) -> f64 {
        let last = self.ys.len() - 1;
        let s = (t - self.t0) / self.step;
        if s <= 0.0 || last == 0 {
            return self.ys[0];
        }
        if s >= last as f64 {
            return self.ys[last];
        }
        let k = (s.floor() as usize).min(last - 1);
        let u = s - k as f64;
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        y0 + (y1 - y0) * smoothstep(u)
    }

    /// `(t, x, y)` samples at spacing `dt` over the whole reference.
    pub fn sample(&self, dt: f64) -> Vec<(f64, f64, f64)> {
        let n = ((self.end_time() - self.t0) / dt).round() as usize;
        (0..=n)
            .map(|i| {
                let t = self.t0 + i as f64 * dt;
                (t, self.x_at(t), self.y_at(t))
            })
            .collect()
    }
}

/// Builds the reference for a timed cell sequence.
///
/// Timestamps must be evenly spaced and consecutive cells may differ by at
/// most one row. `x_start` is the ego's longitudinal position at the first
/// timestamp.
pub fn waypoints_to_reference(
    plan: &[(CellId, f64)],
    g: &GridGeometry,
    x_start: f64,
    v: f64,
) -> Result<ReferenceTrajectory, VehicleError> {
    let Some(&(_, t0)) = plan.first() else {
        return Err(VehicleError::BadReference("empty plan".into()));
    };
    let step = if plan.len() > 1 { plan[1].1 - t0 } else { 1.0 };
    for (k, w) in plan.windows(2).enumerate() {
        let dt = w[1].1 - w[0].1;
        if !(dt > 0.0) || (dt - step).abs() > 1e-9 * step.max(1.0) {
            return Err(VehicleError::BadReference(format!(
                "timestamps must increase evenly; step {k} has spacing {dt}"
            )));
        }
        if w[0].0.row.abs_diff(w[1].0.row) > 1 {
            return Err(VehicleError::BadReference(format!(
                "plan jumps from {} to {} in one step",
                w[0].0, w[1].0
            )));
        }
    }
    let ys = plan.iter().map(|(c, _)| g.row_center_y(c.row)).collect();
    ReferenceTrajectory::new(t0, x_start, v, step, ys)
}

/// Error state `[Y - Y_p(t), Ψ, α_T, Ψ̇]`.
pub fn tracking_error(state: &EgoState, reference: &ReferenceTrajectory, t: f64) -> Vector4<f64> {
    Vector4::new(state.y - reference.y_at(t), state.psi, state.alpha_t, state.psi_dot)
}

/// LQR steering command `-K · e(t)`.
pub fn track(state: &EgoState, reference: &ReferenceTrajectory, t: f64, gain: &LqrGain) -> f64 {
    let e = tracking_error(state, reference, t);
    -gain.k.iter().zip(e.iter()).map(|(k, e)| k * e).sum::<f64>()
}

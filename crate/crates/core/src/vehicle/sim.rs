use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use super::{EgoState, VehicleError, VehicleParams};

/// Steering limit, rad.
pub const STEER_LIMIT: f64 = 0.5;

/// Saturating steering actuator that counts clipped commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Actuator {
    pub limit: f64,
    pub saturation_events: u64,
}

impl Default for Actuator {
    fn default() -> Self {
        Actuator {
            limit: STEER_LIMIT,
            saturation_events: 0,
        }
    }
}

impl Actuator {
    /// Clips `raw` to the limit without counting.
    pub fn clamp(&self, raw: f64) -> f64 {
        raw.clamp(-self.limit, self.limit)
    }

    /// Clips `raw` and records whether clipping happened.
    pub fn apply(&mut self, raw: f64) -> f64 {
        if raw.abs() > self.limit {
            self.saturation_events += 1;
        }
        self.clamp(raw)
    }
}

/// One sample of an integrated trajectory; `delta` is the command at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub t: f64,
    pub state: EgoState,
    pub delta: f64,
}

/// Single-track lateral integrator with precomputed system matrices.
#[derive(Debug, Clone)]
pub struct Rk4 {
    a: Matrix4<f64>,
    b: Vector4<f64>,
    v: f64,
}

impl Rk4 {
    pub fn new(p: &VehicleParams) -> Result<Self, VehicleError> {
        p.validate()?;
        let (a, b) = p.system();
        Ok(Rk4 { a, b, v: p.v_t })
    }

    /// One classic fourth-order step of length `dt` from time `t`.
    ///
    /// The controller is queried at every stage. `x` is advanced by `v·dt`;
    /// callers that need `x(t)` without accumulated rounding should compute it
    /// from the step count.
    pub fn step<C>(&self, t: f64, s: &EgoState, dt: f64, controller: &mut C) -> EgoState
    where
        C: FnMut(f64, &EgoState) -> f64,
    {
        let z = s.lateral();
        let h = dt;
        let at = |tau: f64, z: &Vector4<f64>| EgoState::with_lateral(s.x + self.v * tau, z);
        let k1 = self.a * z + self.b * controller(t, &at(0.0, &z));
        let z2 = z + k1 * (h / 2.0);
        let k2 = self.a * z2 + self.b * controller(t + h / 2.0, &at(h / 2.0, &z2));
        let z3 = z + k2 * (h / 2.0);
        let k3 = self.a * z3 + self.b * controller(t + h / 2.0, &at(h / 2.0, &z3));
        let z4 = z + k3 * h;
        let k4 = self.a * z4 + self.b * controller(t + h, &at(h, &z4));
        let zn = z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        EgoState::with_lateral(s.x + self.v * h, &zn)
    }
}

/// Integrates the closed loop for `duration` seconds at step `dt`.
///
/// Returns `duration/dt + 1` samples starting at `t = 0`; `x` is computed as
/// `x(0) + v·t` from the step index.
pub fn integrate<C>(
    initial: EgoState,
    mut controller: C,
    p: &VehicleParams,
    dt: f64,
    duration: f64,
) -> Result<Vec<TracePoint>, VehicleError>
where
    C: FnMut(f64, &EgoState) -> f64,
{
    if !(dt > 0.0 && dt.is_finite()) || dt >= duration {
        return Err(VehicleError::BadStep { dt, duration });
    }
    let rk = Rk4::new(p)?;
    let steps = (duration / dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = initial;
    for i in 0..=steps {
        let t = i as f64 * dt;
        s.x = initial.x + p.v_t * t;
        let delta = controller(t, &s);
        out.push(TracePoint { t, state: s, delta });
        if i < steps {
            s = rk.step(t, &s, dt, &mut controller);
        }
    }
    Ok(out)
}

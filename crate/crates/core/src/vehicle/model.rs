use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::VehicleError;

/// Physical constants of the single-track model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Total mass, kg.
    pub m_t: f64,
    /// Yaw moment of inertia, kg·m².
    pub i_t: f64,
    /// Tire cornering stiffness.
    pub k: f64,
    /// Center of gravity to front axle, m.
    pub a: f64,
    /// Center of gravity to rear axle, m.
    pub b: f64,
    /// Constant forward speed, m/s.
    pub v_t: f64,
    /// Friction coefficient; carried for completeness, the linear model ignores it.
    pub mu: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            m_t: 1300.0,
            i_t: 1.0e4,
            k: 91_090.0,
            a: 1.6154,
            b: 1.3462,
            v_t: 16.75,
            mu: 0.8,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), VehicleError> {
        let fields = [
            ("m_t", self.m_t),
            ("i_t", self.i_t),
            ("k", self.k),
            ("a", self.a),
            ("b", self.b),
            ("v_t", self.v_t),
            ("mu", self.mu),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(VehicleError::BadParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Lateral system matrices over `[Y, Ψ, α_T, Ψ̇]` with input `δ`.
    pub fn system(&self) -> (Matrix4<f64>, Vector4<f64>) {
        let VehicleParams {
            m_t, i_t, k, a, b, v_t, ..
        } = *self;
        let mv = m_t * v_t;
        let cross = a - b;
        #[rustfmt::skip]
        let am = Matrix4::new(
            0.0, v_t, v_t, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, -2.0 * k / mv, -(mv - cross * k / v_t) / mv,
            0.0, 0.0, cross * k / i_t, -(a * a + b * b) * k / (i_t * v_t),
        );
        let bm = Vector4::new(0.0, 0.0, k / mv, a * k / i_t);
        (am, bm)
    }
}

/// Full ego state; `x` evolves kinematically at the constant speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub alpha_t: f64,
    pub psi_dot: f64,
}

impl EgoState {
    /// Position `(x, y)` with the nominal initial sideslip and yaw rate.
    pub fn initial(x: f64, y: f64) -> Self {
        EgoState {
            x,
            y,
            psi: 0.0,
            alpha_t: -0.2,
            psi_dot: 0.7,
        }
    }

    pub fn lateral(&self) -> Vector4<f64> {
        Vector4::new(self.y, self.psi, self.alpha_t, self.psi_dot)
    }

    pub fn with_lateral(x: f64, z: &Vector4<f64>) -> Self {
        EgoState {
            x,
            y: z[0],
            psi: z[1],
            alpha_t: z[2],
            psi_dot: z[3],
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.psi, self.alpha_t, self.psi_dot]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Time derivative of the full state under steering `delta`.
pub fn dynamics(state: &EgoState, delta: f64, p: &VehicleParams) -> EgoState {
    let (am, bm) = p.system();
    let dz = am * state.lateral() + bm * delta;
    EgoState::with_lateral(p.v_t, &dz)
}

use serde::{Deserialize, Serialize};

use super::RauError;
use crate::mdp::GridGeometry;

/// Another traffic participant, in window coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipantState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub length: f64,
    pub width: f64,
}

impl ParticipantState {
    pub fn validate(&self) -> Result<(), RauError> {
        let finite = [self.x, self.y, self.vx, self.vy, self.length, self.width]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.length <= 0.0 || self.width <= 0.0 {
            return Err(RauError::BadParticipant(format!("{self:?}")));
        }
        Ok(())
    }

    /// Same participant shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        ParticipantState {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// Center after `t` seconds at constant velocity.
    pub fn position_at(&self, t: f64) -> (f64, f64) {
        (self.x + self.vx * t, self.y + self.vy * t)
    }
}

/// Occupancy probabilities per forecast step; `grids[t][cell_index]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyForecast {
    pub rows: usize,
    pub cols: usize,
    pub grids: Vec<Vec<f64>>,
}

impl OccupancyForecast {
    /// Forecast with all cells free, `horizon + 1` steps.
    pub fn empty(g: &GridGeometry, horizon: usize) -> Self {
        OccupancyForecast {
            rows: g.rows(),
            cols: g.cols(),
            grids: vec![vec![0.0; g.cell_count()]; horizon + 1],
        }
    }

    pub fn horizon_steps(&self) -> usize {
        self.grids.len() - 1
    }

    pub fn at(&self, step: usize, row: usize, col: usize) -> f64 {
        self.grids[step][row * self.cols + col]
    }

    /// Maximum over steps `0..=lookahead` (clamped to the horizon).
    pub fn max_over(&self, lookahead: usize) -> Vec<f64> {
        let last = lookahead.min(self.horizon_steps());
        let mut out = self.grids[0].clone();
        for grid in &self.grids[1..=last] {
            for (o, &p) in out.iter_mut().zip(grid) {
                *o = o.max(p);
            }
        }
        out
    }
}

/// Length of the overlap of `[a0, a1]` and `[b0, b1]`.
fn overlap_1d(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Constant-velocity forecast with linearly growing footprint dilation.
///
/// At step `t` each footprint is translated by `t·dt·(vx, vy)` and grown by
/// `t·dt·sigma_growth` on every side. A cell's probability is the largest
/// fraction of its area covered by any dilated footprint. The result has
/// `horizon + 1` grids, step 0 being the current rasterization.
pub fn predict_occupancy(
    participants: &[ParticipantState],
    g: &GridGeometry,
    horizon: usize,
    dt: f64,
    sigma_growth: f64,
) -> Result<OccupancyForecast, RauError> {
    if horizon < 1 {
        return Err(RauError::BadForecast("horizon must be at least 1".into()));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(RauError::BadForecast(format!("dt must be positive, got {dt}")));
    }
    if !(sigma_growth.is_finite() && sigma_growth >= 0.0) {
        return Err(RauError::BadForecast(format!(
            "sigma_growth must be non-negative, got {sigma_growth}"
        )));
    }
    for p in participants {
        p.validate()?;
    }
    let mut forecast = OccupancyForecast::empty(g, horizon);
    let cell_area = g.cell_width() * g.cell_length();
    let (cl, cw) = (g.cell_length(), g.cell_width());
    for (step, grid) in forecast.grids.iter_mut().enumerate() {
        let t = step as f64 * dt;
        let dilation = t * sigma_growth;
        for p in participants {
            let (cx, cy) = p.position_at(t);
            let hx = 0.5 * p.length + dilation;
            let hy = 0.5 * p.width + dilation;
            let (x0, x1, y0, y1) = (cx - hx, cx + hx, cy - hy, cy + hy);
            // Only visit the cells the rectangle can touch.
            let c_lo = (x0 / cl).floor().max(0.0) as usize;
            let c_hi = ((x1 / cl).ceil().max(0.0) as usize).min(g.cols());
            let r_lo = (y0 / cw + 0.5 * g.rows() as f64).floor().max(0.0) as usize;
            let r_hi = ((y1 / cw + 0.5 * g.rows() as f64).ceil().max(0.0) as usize).min(g.rows());
            for row in r_lo..r_hi {
                for col in c_lo..c_hi {
                    let cell = crate::mdp::CellId::new(row, col);
                    let (bx0, bx1, by0, by1) = g.cell_bounds(cell);
                    let area = overlap_1d(x0, x1, bx0, bx1) * overlap_1d(y0, y1, by0, by1);
                    if area > 0.0 {
                        let prob = (area / cell_area).min(1.0);
                        let slot = &mut grid[g.index(cell)];
                        *slot = slot.max(prob);
                    }
                }
            }
        }
    }
    Ok(forecast)
}

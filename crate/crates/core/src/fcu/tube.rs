use std::collections::BTreeSet;

use super::FcuError;
use crate::mdp::{CellId, GridGeometry};
use crate::rau::RiskField;
use crate::vehicle::ReferenceTrajectory;

/// Cells of the road frame share the window's rows; columns count from
/// `x = 0` in steps of the cell length.
pub fn road_col(g: &GridGeometry, x: f64) -> Option<usize> {
    let c = (x / g.cell_length()).floor();
    (c >= 0.0 && c.is_finite()).then_some(c as usize)
}

/// Road-frame cell containing `(x, y)`, if it lies on the grid rows.
pub fn road_cell(g: &GridGeometry, x: f64, y: f64) -> Option<CellId> {
    Some(CellId::new(g.row_at(y)?, road_col(g, x)?))
}

/// `(x_lo, x_hi, y_lo, y_hi)` of a road-frame cell.
pub fn road_cell_bounds(g: &GridGeometry, c: CellId) -> (f64, f64, f64, f64) {
    let x_lo = c.col as f64 * g.cell_length();
    let y = g.row_center_y(c.row);
    let hw = 0.5 * g.cell_width();
    (x_lo, x_lo + g.cell_length(), y - hw, y + hw)
}

/// Euclidean distance from a point to an axis-aligned rectangle.
fn distance_to_rect(x: f64, y: f64, (x0, x1, y0, y1): (f64, f64, f64, f64)) -> f64 {
    let dx = (x0 - x).max(0.0).max(x - x1);
    let dy = (y0 - y).max(0.0).max(y - y1);
    dx.hypot(dy)
}

/// Time-indexed over-approximation of the cells the tracked ego may touch.
///
/// Step `k` belongs to time `t_start + k·tau_env`; cells are in the road frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachTube {
    pub t_start: f64,
    pub tau_env: f64,
    pub steps: Vec<BTreeSet<CellId>>,
}

impl ReachTube {
    pub fn horizon(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn contains(&self, step: usize, c: CellId) -> bool {
        self.steps.get(step).is_some_and(|s| s.contains(&c))
    }
}

/// Cells within `radius` of the reference point at each of `horizon + 1`
/// sample times. The cell holding the point is always included; any other
/// cell must come strictly closer than `radius`.
pub fn reach_tube(
    reference: &ReferenceTrajectory,
    radius: f64,
    g: &GridGeometry,
    t_start: f64,
    tau_env: f64,
    horizon: usize,
) -> Result<ReachTube, FcuError> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(FcuError::BadTube(format!("radius must be non-negative, got {radius}")));
    }
    if !(tau_env > 0.0 && tau_env.is_finite()) {
        return Err(FcuError::BadTube(format!("step must be positive, got {tau_env}")));
    }
    let mut steps = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        let t = t_start + k as f64 * tau_env;
        let (x, y) = (reference.x_at(t), reference.y_at(t));
        let mut cells = BTreeSet::new();
        if let Some(c) = road_cell(g, x, y) {
            cells.insert(c);
        }
        if radius > 0.0 {
            let (Some(c_lo), Some(c_hi)) = (road_col(g, (x - radius).max(0.0)), road_col(g, x + radius))
            else {
                steps.push(cells);
                continue;
            };
            let r_lo = g.row_at_clamped(y - radius);
            let r_hi = g.row_at_clamped(y + radius);
            for row in r_lo..=r_hi {
                for col in c_lo..=c_hi {
                    let c = CellId::new(row, col);
                    if distance_to_rect(x, y, road_cell_bounds(g, c)) < radius {
                        cells.insert(c);
                    }
                }
            }
        }
        steps.push(cells);
    }
    Ok(ReachTube {
        t_start,
        tau_env,
        steps,
    })
}

/// Risky (`hr` or `un`) road-frame cells per step.
///
/// Lookups past the last layer reuse the last layer, so a single layer is a
/// time-invariant set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RiskSet {
    pub layers: Vec<BTreeSet<CellId>>,
}

impl RiskSet {
    pub fn empty() -> Self {
        RiskSet { layers: Vec::new() }
    }

    /// The same cells at every step.
    pub fn invariant(cells: BTreeSet<CellId>) -> Self {
        RiskSet {
            layers: vec![cells],
        }
    }

    /// Risky cells of a window classification whose first column sits at
    /// road column `origin_col`.
    pub fn from_field(field: &RiskField, origin_col: usize) -> Self {
        Self::invariant(
            field
                .risky_cells()
                .map(|c| CellId::new(c.row, c.col + origin_col))
                .collect(),
        )
    }

    pub fn layer(&self, step: usize) -> Option<&BTreeSet<CellId>> {
        self.layers.get(step.min(self.layers.len().checked_sub(1)?))
    }

    pub fn contains(&self, step: usize, c: CellId) -> bool {
        self.layer(step).is_some_and(|l| l.contains(&c))
    }

    pub fn is_empty(&self) -> bool {
        self.layers.iter().all(|l| l.is_empty())
    }

    /// Step-wise `self \ other`.
    pub fn without(&self, other: &RiskSet) -> RiskSet {
        let n = self.layers.len().max(if self.layers.is_empty() { 0 } else { other.layers.len() });
        RiskSet {
            layers: (0..n)
                .map(|k| {
                    let mine = self.layer(k).cloned().unwrap_or_default();
                    match other.layer(k) {
                        Some(theirs) => mine.difference(theirs).copied().collect(),
                        None => mine,
                    }
                })
                .collect(),
        }
    }

    /// Number of risky cells in `row` over columns `cols` at `step`.
    pub fn count_in_row(&self, step: usize, row: usize, cols: std::ops::RangeInclusive<usize>) -> usize {
        cols.filter(|&col| self.contains(step, CellId::new(row, col))).count()
    }
}

/// The feasibility flag; `Infeasible` carries the earliest conflict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Infeasible { cell: CellId, step: usize },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

/// Feasible iff no tube cell is risky at its own step.
pub fn check_feasible(tube: &ReachTube, risk: &RiskSet) -> Feasibility {
    for (step, cells) in tube.steps.iter().enumerate() {
        if let Some(layer) = risk.layer(step) {
            if let Some(&cell) = cells.iter().find(|c| layer.contains(c)) {
                return Feasibility::Infeasible { cell, step };
            }
        }
    }
    Feasibility::Feasible
}

use serde::{Deserialize, Serialize};

use super::{OccupancyForecast, RauError};
use crate::mdp::{CellId, GridGeometry, SafetyState};

/// Occupancy probability thresholds for the `un`, `hr` and `lr` bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskThresholds {
    pub p_un: f64,
    pub p_hr: f64,
    pub p_lr: f64,
}

impl Default for RiskThresholds {
    fn default() -> Self {
        RiskThresholds {
            p_un: 0.8,
            p_hr: 0.4,
            p_lr: 0.1,
        }
    }
}

impl RiskThresholds {
    pub fn validate(&self) -> Result<(), RauError> {
        let ordered = self.p_un > self.p_hr && self.p_hr > self.p_lr && self.p_lr > 0.0;
        if !ordered || self.p_un > 1.0 {
            return Err(RauError::BadThresholds(*self));
        }
        Ok(())
    }

    /// Banding of one occupancy probability.
    pub fn band(&self, p: f64) -> SafetyState {
        if p >= self.p_un {
            SafetyState::Unsafe
        } else if p >= self.p_hr {
            SafetyState::HighRisk
        } else if p >= self.p_lr {
            SafetyState::LowRisk
        } else {
            SafetyState::Safe
        }
    }
}

/// Per-cell safety states for one grid window.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskField {
    rows: usize,
    cols: usize,
    states: Vec<SafetyState>,
    thresholds: RiskThresholds,
    ego: CellId,
    goals: Vec<CellId>,
    no_goal: bool,
}

impl RiskField {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn states(&self) -> &[SafetyState] {
        &self.states
    }

    pub fn state(&self, c: CellId) -> SafetyState {
        self.states[c.row * self.cols + c.col]
    }

    pub fn thresholds(&self) -> RiskThresholds {
        self.thresholds
    }

    pub fn ego(&self) -> CellId {
        self.ego
    }

    /// Goals that survived classification.
    pub fn goals(&self) -> &[CellId] {
        &self.goals
    }

    /// True when every requested goal was unsafe and dropped.
    pub fn no_goal(&self) -> bool {
        self.no_goal
    }

    /// Cells classified `hr` or `un`.
    pub fn risky_cells(&self) -> impl Iterator<Item = CellId> + '_ {
        self.states.iter().enumerate().filter_map(move |(i, s)| {
            s.is_risky().then_some(CellId::new(i / self.cols, i % self.cols))
        })
    }

    pub fn matches(&self, g: &GridGeometry) -> bool {
        self.rows == g.rows() && self.cols == g.cols()
    }
}

fn escalate(current: SafetyState, floor: SafetyState) -> SafetyState {
    match (current.severity(), floor.severity()) {
        (Some(a), Some(b)) if b > a => floor,
        _ => current,
    }
}

/// Bands occupancy probabilities, marks edge rows `un` and raises the
/// lateral neighbors of `un` cells to at least `hr`.
pub fn banded_states(probs: &[f64], g: &GridGeometry, thresholds: RiskThresholds) -> Vec<SafetyState> {
    let mut states: Vec<SafetyState> = probs.iter().map(|&p| thresholds.band(p)).collect();
    for c in g.cells() {
        if g.is_edge_row(c.row) {
            states[g.index(c)] = SafetyState::Unsafe;
        }
    }
    let unsafe_mask: Vec<bool> = states.iter().map(|s| *s == SafetyState::Unsafe).collect();
    for c in g.cells() {
        let near_unsafe = [c.row.checked_sub(1), Some(c.row + 1)]
            .into_iter()
            .flatten()
            .filter_map(|r| g.cell(r, c.col))
            .any(|n| unsafe_mask[g.index(n)]);
        if near_unsafe {
            let i = g.index(c);
            states[i] = escalate(states[i], SafetyState::HighRisk);
        }
    }
    states
}

/// Classifies every cell from the worst occupancy over steps `0..=lookahead`.
///
/// Banding is followed by these overrides, in order: edge rows become `un`;
/// cells laterally adjacent to an `un` cell are raised to at least `hr`;
/// surviving goals become `tg` (goals classified `un` are dropped); the ego
/// cell becomes `cp`.
pub fn classify(
    forecast: &OccupancyForecast,
    g: &GridGeometry,
    ego: CellId,
    goals: &[CellId],
    thresholds: RiskThresholds,
    lookahead: usize,
) -> Result<RiskField, RauError> {
    thresholds.validate()?;
    if forecast.rows != g.rows() || forecast.cols != g.cols() {
        return Err(RauError::GeometryMismatch);
    }
    for &c in goals.iter().chain(std::iter::once(&ego)) {
        if g.cell(c.row, c.col).is_none() {
            return Err(RauError::OutOfBounds(c));
        }
    }
    let mut states = banded_states(&forecast.max_over(lookahead), g, thresholds);
    let mut kept = Vec::with_capacity(goals.len());
    for &goal in goals {
        if goal == ego || states[g.index(goal)] == SafetyState::Unsafe || kept.contains(&goal) {
            continue;
        }
        kept.push(goal);
    }
    for &goal in &kept {
        states[g.index(goal)] = SafetyState::Goal;
    }
    states[g.index(ego)] = SafetyState::Current;
    let no_goal = !goals.is_empty() && kept.is_empty();
    Ok(RiskField {
        rows: g.rows(),
        cols: g.cols(),
        states,
        thresholds,
        ego,
        goals: kept,
        no_goal,
    })
}

/// Last-column cells of `lane` (if any) as goal candidates.
pub fn lane_goal_candidates(g: &GridGeometry, lane: usize) -> Vec<CellId> {
    let last = g.cols() - 1;
    g.lanes()
        .get(lane)
        .map(|rows| rows.clone().map(|r| CellId::new(r, last)).collect())
        .unwrap_or_default()
}

/// Every non-edge cell of the last column.
pub fn any_goal_candidates(g: &GridGeometry) -> Vec<CellId> {
    let last = g.cols() - 1;
    (1..g.rows() - 1).map(|r| CellId::new(r, last)).collect()
}

/// Classifies with goals on the preferred lane, falling back to any non-`un`
/// last-column cell when the whole lane is unsafe.
pub fn classify_with_goal_fallback(
    forecast: &OccupancyForecast,
    g: &GridGeometry,
    ego: CellId,
    preferred_lane: usize,
    thresholds: RiskThresholds,
    lookahead: usize,
) -> Result<RiskField, RauError> {
    let field = classify(
        forecast,
        g,
        ego,
        &lane_goal_candidates(g, preferred_lane),
        thresholds,
        lookahead,
    )?;
    if !field.goals().is_empty() {
        return Ok(field);
    }
    classify(forecast, g, ego, &any_goal_candidates(g), thresholds, lookahead)
}

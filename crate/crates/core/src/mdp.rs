//! Grid-world highway model: cell geometry, the three sector actions and the
//! slip-based transition model shared by every planner component.
//!
//! Rows run laterally (row 0 is the lowest `y`), columns run longitudinally.
//! Window coordinates put `x = 0` at the rear edge of column 0 and `y = 0` at
//! the lateral center of the grid.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rau::RewardModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 3 rows and 2 columns, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
    #[error("cell dimensions must be positive and finite (width {width}, length {length})")]
    BadCellSize { width: f64, length: f64 },
    #[error("lane layout invalid: {0}")]
    BadLanes(String),
    #[error("success probability must lie in (0, 1], got {0}")]
    BadSuccessProbability(f64),
    #[error("transition row for state {state}, action {action} is invalid: {reason}")]
    BadTransitionRow {
        state: usize,
        action: usize,
        reason: String,
    },
    #[error("discount must lie in (0, 1], got {0}")]
    BadDiscount(f64),
    #[error("local MDP invalid: {0}")]
    BadMdp(String),
}

/// Per-cell safety classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SafetyState {
    #[serde(rename = "un")]
    Unsafe,
    #[serde(rename = "sa")]
    Safe,
    #[serde(rename = "hr")]
    HighRisk,
    #[serde(rename = "lr")]
    LowRisk,
    #[serde(rename = "tg")]
    Goal,
    #[serde(rename = "cp")]
    Current,
}

impl SafetyState {
    pub const ALL: [SafetyState; 6] = [
        SafetyState::Unsafe,
        SafetyState::Safe,
        SafetyState::HighRisk,
        SafetyState::LowRisk,
        SafetyState::Goal,
        SafetyState::Current,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            SafetyState::Unsafe => "un",
            SafetyState::Safe => "sa",
            SafetyState::HighRisk => "hr",
            SafetyState::LowRisk => "lr",
            SafetyState::Goal => "tg",
            SafetyState::Current => "cp",
        }
    }

    /// Severity rank on the risk ladder `sa < lr < hr < un`. Goal and current
    /// cells are not on the ladder.
    pub fn severity(self) -> Option<u8> {
        match self {
            SafetyState::Safe => Some(0),
            SafetyState::LowRisk => Some(1),
            SafetyState::HighRisk => Some(2),
            SafetyState::Unsafe => Some(3),
            SafetyState::Goal | SafetyState::Current => None,
        }
    }

    /// Cells that belong to the high-risk set monitored for feasibility.
    pub fn is_risky(self) -> bool {
        matches!(self, SafetyState::Unsafe | SafetyState::HighRisk)
    }
}

impl fmt::Display for SafetyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub row: usize,
    pub col: usize,
}

impl CellId {
    pub const fn new(row: usize, col: usize) -> Self {
        CellId { row, col }
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// The three forward sector actions. Each advances one column; `Sec1` moves
/// one row up, `Sec2` keeps the row, `Sec3` moves one row down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HighLevelAction {
    Sec1,
    Sec2,
    Sec3,
}

impl HighLevelAction {
    /// Storage order used by every state-action table.
    pub const ALL: [HighLevelAction; 3] =
        [HighLevelAction::Sec1, HighLevelAction::Sec2, HighLevelAction::Sec3];

    /// Order used to break exact ties: straight first.
    pub const TIE_ORDER: [HighLevelAction; 3] =
        [HighLevelAction::Sec2, HighLevelAction::Sec1, HighLevelAction::Sec3];

    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        match self {
            HighLevelAction::Sec1 => 0,
            HighLevelAction::Sec2 => 1,
            HighLevelAction::Sec3 => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn lateral_offset(self) -> isize {
        match self {
            HighLevelAction::Sec1 => 1,
            HighLevelAction::Sec2 => 0,
            HighLevelAction::Sec3 => -1,
        }
    }
}

impl fmt::Display for HighLevelAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HighLevelAction::Sec1 => "Sec1",
            HighLevelAction::Sec2 => "Sec2",
            HighLevelAction::Sec3 => "Sec3",
        };
        f.write_str(s)
    }
}

/// Row ranges occupied by each lane. Must partition the non-edge rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneLayout(pub Vec<Range<usize>>);

impl LaneLayout {
    /// `lanes` contiguous lanes of `rows_per_lane` rows, starting right above
    /// the lower edge row.
    pub fn uniform(lanes: usize, rows_per_lane: usize) -> Self {
        LaneLayout(
            (0..lanes)
                .map(|l| 1 + l * rows_per_lane..1 + (l + 1) * rows_per_lane)
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    rows: usize,
    cols: usize,
    cell_width: f64,
    cell_length: f64,
    lanes: Vec<Range<usize>>,
}

impl GridGeometry {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn cell_length(&self) -> f64 {
        self.cell_length
    }

    pub fn lanes(&self) -> &[Range<usize>] {
        &self.lanes
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_edge_row(&self, row: usize) -> bool {
        row == 0 || row + 1 == self.rows
    }

    pub fn lane_of_row(&self, row: usize) -> Option<usize> {
        self.lanes.iter().position(|r| r.contains(&row))
    }

    /// Lowest and highest non-edge rows.
    pub fn lane_row_bounds(&self) -> (usize, usize) {
        (1, self.rows - 2)
    }

    /// Lateral extent `[y_lo, y_hi]` of the drivable (non-edge) rows.
    pub fn lane_y_bounds(&self) -> (f64, f64) {
        let lo = self.row_center_y(1) - 0.5 * self.cell_width;
        let hi = self.row_center_y(self.rows - 2) + 0.5 * self.cell_width;
        (lo, hi)
    }

    pub fn width(&self) -> f64 {
        self.rows as f64 * self.cell_width
    }

    pub fn length(&self) -> f64 {
        self.cols as f64 * self.cell_length
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<CellId> {
        (row < self.rows && col < self.cols).then_some(CellId { row, col })
    }

    /// Row-major index `row * cols + col`.
    pub fn index(&self, c: CellId) -> usize {
        debug_assert!(c.row < self.rows && c.col < self.cols);
        c.row * self.cols + c.col
    }

    pub fn cell_at_index(&self, idx: usize) -> CellId {
        CellId {
            row: idx / self.cols,
            col: idx % self.cols,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.cell_count()).map(move |i| self.cell_at_index(i))
    }

    pub fn row_center_y(&self, row: usize) -> f64 {
        (row as f64 - 0.5 * (self.rows as f64 - 1.0)) * self.cell_width
    }

    pub fn col_center_x(&self, col: usize) -> f64 {
        (col as f64 + 0.5) * self.cell_length
    }

    pub fn cell_center(&self, c: CellId) -> (f64, f64) {
        (self.col_center_x(c.col), self.row_center_y(c.row))
    }

    /// `(x_lo, x_hi, y_lo, y_hi)` of a cell rectangle.
    pub fn cell_bounds(&self, c: CellId) -> (f64, f64, f64, f64) {
        let (x, y) = self.cell_center(c);
        let hl = 0.5 * self.cell_length;
        let hw = 0.5 * self.cell_width;
        (x - hl, x + hl, y - hw, y + hw)
    }

    /// Fractional row coordinate, not clamped.
    fn row_coord(&self, y: f64) -> f64 {
        y / self.cell_width + 0.5 * self.rows as f64
    }

    pub fn row_at(&self, y: f64) -> Option<usize> {
        let r = self.row_coord(y).floor();
        (r >= 0.0 && (r as usize) < self.rows).then_some(r as usize)
    }

    /// Row containing `y`, clamped into the grid.
    pub fn row_at_clamped(&self, y: f64) -> usize {
        let r = self.row_coord(y).floor();
        if r < 0.0 {
            0
        } else {
            (r as usize).min(self.rows - 1)
        }
    }

    pub fn col_at(&self, x: f64) -> Option<usize> {
        let c = (x / self.cell_length).floor();
        (c >= 0.0 && (c as usize) < self.cols).then_some(c as usize)
    }

    /// Cell containing a window-frame point, half-open on the upper edges.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<CellId> {
        Some(CellId {
            row: self.row_at(y)?,
            col: self.col_at(x)?,
        })
    }
}

/// Builds a validated grid geometry.
pub fn build_grid(
    rows: usize,
    cols: usize,
    cell_width: f64,
    cell_length: f64,
    lanes: &LaneLayout,
) -> Result<GridGeometry, GridError> {
    if rows < 3 || cols < 2 {
        return Err(GridError::TooSmall { rows, cols });
    }
    let ok = |v: f64| v.is_finite() && v > 0.0;
    if !ok(cell_width) || !ok(cell_length) {
        return Err(GridError::BadCellSize {
            width: cell_width,
            length: cell_length,
        });
    }
    let mut covered = vec![false; rows];
    for lane in &lanes.0 {
        if lane.start >= lane.end {
            return Err(GridError::BadLanes(format!("empty lane {lane:?}")));
        }
        if lane.start == 0 || lane.end > rows - 1 {
            return Err(GridError::BadLanes(format!(
                "lane {lane:?} overlaps an edge row of a {rows}-row grid"
            )));
        }
        for r in lane.clone() {
            if covered[r] {
                return Err(GridError::BadLanes(format!("row {r} belongs to two lanes")));
            }
            covered[r] = true;
        }
    }
    if let Some(r) = (1..rows - 1).find(|&r| !covered[r]) {
        return Err(GridError::BadLanes(format!("row {r} is not assigned to a lane")));
    }
    Ok(GridGeometry {
        rows,
        cols,
        cell_width,
        cell_length,
        lanes: lanes.0.clone(),
    })
}

/// Intended successor of `s` under `a`: one column ahead, row shifted by the
/// action's offset and clamped. The last column is absorbing.
pub fn next_cell(s: CellId, a: HighLevelAction, g: &GridGeometry) -> CellId {
    if s.col + 1 >= g.cols {
        return s;
    }
    CellId {
        row: shifted_row(s.row, a.lateral_offset(), g.rows),
        col: s.col + 1,
    }
}

fn shifted_row(row: usize, offset: isize, rows: usize) -> usize {
    (row as isize + offset).clamp(0, rows as isize - 1) as usize
}

/// Sparse state-action-successor table in compressed row form, indexed by
/// `state * 3 + action`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    n_states: usize,
    p_success: Option<f64>,
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

const MASS_TOL: f64 = 1e-12;

impl TransitionModel {
    /// Builds a model from explicit successor lists, one per `(s, a)` in
    /// `state * 3 + action` order. Duplicate successors are merged.
    pub fn from_rows(n_states: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self, GridError> {
        if rows.len() != n_states * HighLevelAction::COUNT {
            return Err(GridError::BadTransitionRow {
                state: 0,
                action: 0,
                reason: format!(
                    "expected {} rows, got {}",
                    n_states * HighLevelAction::COUNT,
                    rows.len()
                ),
            });
        }
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            let (state, action) = (i / 3, i % 3);
            let bad = |reason: String| GridError::BadTransitionRow {
                state,
                action,
                reason,
            };
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (s2, p) in row {
                if s2 >= n_states {
                    return Err(bad(format!("successor {s2} out of range")));
                }
                if !(p.is_finite() && p >= 0.0) {
                    return Err(bad(format!("mass {p} is not a probability")));
                }
                if p == 0.0 {
                    continue;
                }
                match merged.iter_mut().find(|(s, _)| *s == s2) {
                    Some(e) => e.1 += p,
                    None => merged.push((s2, p)),
                }
            }
            let total: f64 = merged.iter().map(|e| e.1).sum();
            if (total - 1.0).abs() > MASS_TOL {
                return Err(bad(format!("masses sum to {total}")));
            }
            merged.sort_by_key(|e| e.0);
            entries.extend(merged);
            offsets.push(entries.len());
        }
        Ok(TransitionModel {
            n_states,
            p_success: None,
            offsets,
            entries,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn p_success(&self) -> Option<f64> {
        self.p_success
    }

    pub fn successors(&self, state: usize, action: usize) -> &[(usize, f64)] {
        let i = state * HighLevelAction::COUNT + action;
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn probability(&self, state: usize, action: usize, next: usize) -> f64 {
        self.successors(state, action)
            .iter()
            .find(|e| e.0 == next)
            .map_or(0.0, |e| e.1)
    }

    pub fn is_deterministic(&self) -> bool {
        (0..self.offsets.len() - 1).all(|i| self.offsets[i + 1] - self.offsets[i] == 1)
    }

    /// Draws a successor by inverting the cumulative mass with `u ∈ [0, 1)`.
    pub fn sample_successor(&self, state: usize, action: usize, u: f64) -> usize {
        let succ = self.successors(state, action);
        let mut acc = 0.0;
        for &(s2, p) in succ {
            acc += p;
            if u < acc {
                return s2;
            }
        }
        succ[succ.len() - 1].0
    }
}

/// Slip transition model over a grid: the intended successor receives
/// `p_success`, the other two cells one column ahead share the remainder
/// equally, and clamped duplicates are merged. Last-column cells self-loop.
pub fn make_transitions(p_success: f64, g: &GridGeometry) -> Result<TransitionModel, GridError> {
    if !(p_success > 0.0 && p_success <= 1.0) {
        return Err(GridError::BadSuccessProbability(p_success));
    }
    let slip = 0.5 * (1.0 - p_success);
    let mut rows = Vec::with_capacity(g.cell_count() * 3);
    for s in g.cells() {
        for a in HighLevelAction::ALL {
            if s.col + 1 >= g.cols() {
                rows.push(vec![(g.index(s), 1.0)]);
                continue;
            }
            let mut row = Vec::with_capacity(3);
            for b in HighLevelAction::ALL {
                let p = if b == a { p_success } else { slip };
                row.push((g.index(next_cell(s, b, g)), p));
            }
            rows.push(row);
        }
    }
    let mut model = TransitionModel::from_rows(g.cell_count(), rows)?;
    model.p_success = Some(p_success);
    Ok(model)
}

/// One stationary planning problem over the current grid window.
#[derive(Debug, Clone)]
pub struct LocalMdp {
    geometry: GridGeometry,
    transitions: TransitionModel,
    rewards: RewardModel,
    gamma: f64,
    ego: CellId,
    goals: Vec<CellId>,
}

impl LocalMdp {
    pub fn new(
        geometry: GridGeometry,
        transitions: TransitionModel,
        rewards: RewardModel,
        gamma: f64,
        ego: CellId,
        goals: Vec<CellId>,
    ) -> Result<Self, GridError> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(GridError::BadDiscount(gamma));
        }
        if transitions.n_states() != geometry.cell_count() {
            return Err(GridError::BadMdp(
                "transition model does not match the grid".into(),
            ));
        }
        if rewards.n_states() != geometry.cell_count() {
            return Err(GridError::BadMdp("reward model does not match the grid".into()));
        }
        if geometry.cell(ego.row, ego.col).is_none() {
            return Err(GridError::BadMdp(format!("ego cell {ego} out of bounds")));
        }
        if goals.contains(&ego) {
            return Err(GridError::BadMdp("ego cell is listed as a goal".into()));
        }
        let cp = rewards
            .field_states()
            .iter()
            .filter(|s| **s == SafetyState::Current)
            .count();
        if cp != 1 || rewards.field_states()[geometry.index(ego)] != SafetyState::Current {
            return Err(GridError::BadMdp(
                "reward model must mark exactly the ego cell as current".into(),
            ));
        }
        Ok(LocalMdp {
            geometry,
            transitions,
            rewards,
            gamma,
            ego,
            goals,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn transitions(&self) -> &TransitionModel {
        &self.transitions
    }

    pub fn rewards(&self) -> &RewardModel {
        &self.rewards
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn ego(&self) -> CellId {
        self.ego
    }

    pub fn goals(&self) -> &[CellId] {
        &self.goals
    }
}

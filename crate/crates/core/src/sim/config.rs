use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SimError;
use crate::fcu::Clocks;
use crate::mdp::{build_grid, GridGeometry, LaneLayout};
use crate::rau::{ParticipantState, RewardParams, RiskThresholds};
use crate::risk_q::EntropicParams;
use crate::vehicle::{EgoState, LqrWeights, VehicleParams};

/// Top-level keys that must be present in every scenario file.
pub const REQUIRED_KEYS: [&str; 4] = ["version", "grid", "ego", "participants"];

/// The only scenario format version understood by this build.
pub const CONFIG_VERSION: u32 = 1;

/// Scenario bundled with the library.
pub const HIGHWAY_OVERTAKE: &str = include_str!("../../scenarios/highway_overtake.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    pub cell_width: f64,
    pub cell_length: f64,
    pub lanes: usize,
    pub rows_per_lane: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            rows: 11,
            cols: 39,
            cell_width: 2.0,
            cell_length: 3.5,
            lanes: 3,
            rows_per_lane: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoConfig {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub psi: f64,
    #[serde(default = "default_alpha_t")]
    pub alpha_t: f64,
    #[serde(default = "default_psi_dot")]
    pub psi_dot: f64,
    #[serde(default = "default_ego_length")]
    pub length: f64,
    #[serde(default = "default_ego_width")]
    pub width: f64,
    /// Lane whose last-column cells are the goals; defaults to the start lane.
    #[serde(default)]
    pub preferred_lane: Option<usize>,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub lqr: LqrWeights,
}

fn default_alpha_t() -> f64 {
    -0.2
}
fn default_psi_dot() -> f64 {
    0.7
}
fn default_ego_length() -> f64 {
    3.5
}
fn default_ego_width() -> f64 {
    2.0
}

impl EgoConfig {
    pub fn initial_state(&self) -> EgoState {
        EgoState {
            x: self.x,
            y: self.y,
            psi: self.psi,
            alpha_t: self.alpha_t,
            psi_dot: self.psi_dot,
        }
    }
}

/// Another vehicle at `t = 0`, moving at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantConfig {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub vx: f64,
    #[serde(default)]
    pub vy: f64,
    #[serde(default = "default_other_length")]
    pub length: f64,
    #[serde(default = "default_other_width")]
    pub width: f64,
}

fn default_other_length() -> f64 {
    7.0
}
fn default_other_width() -> f64 {
    4.0
}

impl ParticipantConfig {
    pub fn state(&self) -> ParticipantState {
        ParticipantState {
            x: self.x,
            y: self.y,
            vx: self.vx,
            vy: self.vy,
            length: self.length,
            width: self.width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig {
    pub p_un: f64,
    pub p_hr: f64,
    pub p_lr: f64,
    /// Forecast steps (of one environment period each) folded into the
    /// classification. The default of one covers the period for which a
    /// local problem stays valid.
    pub lookahead: usize,
    /// Footprint dilation rate of the forecast, m/s.
    pub sigma_growth: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        let t = RiskThresholds::default();
        RiskConfig {
            p_un: t.p_un,
            p_hr: t.p_hr,
            p_lr: t.p_lr,
            lookahead: 1,
            sigma_growth: 0.25,
        }
    }
}

impl RiskConfig {
    pub fn thresholds(&self) -> RiskThresholds {
        RiskThresholds {
            p_un: self.p_un,
            p_hr: self.p_hr,
            p_lr: self.p_lr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropicConfig {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for EntropicConfig {
    fn default() -> Self {
        EntropicConfig {
            alpha: 0.2,
            gamma: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitionConfig {
    pub p_success: f64,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig { p_success: 0.9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    /// Number of exploration policies.
    pub policies: usize,
    /// Tuples drawn per exploration policy.
    pub per_policy: usize,
    /// Inner cost realizations per tuple.
    pub inner: usize,
    /// Tuples added for each pair the main draw missed.
    pub top_up: usize,
    pub dedup: bool,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            policies: 10,
            per_policy: 1000,
            inner: 10,
            top_up: 1,
            dedup: false,
            tol: 1e-10,
            max_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcuConfig {
    /// Radius of the tracking-error tube, m.
    pub tube_radius: f64,
}

impl Default for FcuConfig {
    fn default() -> Self {
        FcuConfig { tube_radius: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub grid: GridConfig,
    pub ego: EgoConfig,
    pub participants: Vec<ParticipantConfig>,
    #[serde(default)]
    pub risk: RiskConfig,
    #[serde(default)]
    pub rewards: RewardParams,
    #[serde(default)]
    pub entropic: EntropicConfig,
    #[serde(default)]
    pub clocks: Clocks,
    #[serde(default)]
    pub transitions: TransitionConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub fcu: FcuConfig,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_duration() -> f64 {
    12.0
}

fn invalid(field: &str, message: impl Into<String>) -> SimError {
    SimError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    /// The bundled highway scenario.
    pub fn highway_overtake() -> Self {
        parse_config(HIGHWAY_OVERTAKE).expect("bundled scenario is valid")
    }

    pub fn geometry(&self) -> Result<GridGeometry, SimError> {
        let gc = &self.grid;
        if gc.lanes * gc.rows_per_lane + 2 != gc.rows {
            return Err(invalid(
                "grid.rows",
                format!(
                    "{} lanes of {} rows plus two edge rows need {} rows, got {}",
                    gc.lanes,
                    gc.rows_per_lane,
                    gc.lanes * gc.rows_per_lane + 2,
                    gc.rows
                ),
            ));
        }
        build_grid(
            gc.rows,
            gc.cols,
            gc.cell_width,
            gc.cell_length,
            &LaneLayout::uniform(gc.lanes, gc.rows_per_lane),
        )
        .map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn entropic_params(&self) -> Result<EntropicParams, SimError> {
        EntropicParams::new(self.entropic.alpha, self.entropic.gamma)
            .map_err(|e| invalid("entropic", e.to_string()))
    }

    /// Lane holding the goals.
    pub fn preferred_lane(&self, g: &GridGeometry) -> usize {
        self.ego
            .preferred_lane
            .or_else(|| g.lane_of_row(g.row_at_clamped(self.ego.y)))
            .unwrap_or(0)
    }

    /// Checks every module precondition, naming the offending field.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.version != CONFIG_VERSION {
            return Err(invalid(
                "version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        let g = self.geometry()?;
        let e = &self.ego;
        if !(e.x >= 0.0 && e.x.is_finite()) {
            return Err(invalid("ego.x", format!("must be a finite non-negative position, got {}", e.x)));
        }
        match g.row_at(e.y) {
            Some(r) if !g.is_edge_row(r) => {}
            _ => return Err(invalid("ego.y", format!("{} is not inside a lane", e.y))),
        }
        if ![e.psi, e.alpha_t, e.psi_dot].iter().all(|v| v.is_finite()) {
            return Err(invalid("ego", "initial attitude must be finite"));
        }
        if !(e.length > 0.0 && e.width > 0.0) {
            return Err(invalid("ego.length", "footprint must be positive"));
        }
        if let Some(l) = e.preferred_lane {
            if l >= g.lanes().len() {
                return Err(invalid("ego.preferred_lane", format!("lane {l} does not exist")));
            }
        }
        e.vehicle
            .validate()
            .map_err(|err| invalid("ego.vehicle", err.to_string()))?;
        if !(e.lqr.r > 0.0 && e.lqr.q_diag.iter().all(|q| *q >= 0.0 && q.is_finite())) {
            return Err(invalid("ego.lqr", "needs r > 0 and non-negative state weights"));
        }
        for (i, p) in self.participants.iter().enumerate() {
            p.state()
                .validate()
                .map_err(|err| invalid(&format!("participants[{i}]"), err.to_string()))?;
        }
        self.risk
            .thresholds()
            .validate()
            .map_err(|err| invalid("risk", err.to_string()))?;
        if self.risk.lookahead == 0 {
            return Err(invalid("risk.lookahead", "must be at least 1"));
        }
        if !(self.risk.sigma_growth >= 0.0 && self.risk.sigma_growth.is_finite()) {
            return Err(invalid("risk.sigma_growth", "must be non-negative"));
        }
        self.rewards
            .validate()
            .map_err(|err| invalid("rewards", err.to_string()))?;
        let p = self.entropic_params()?;
        if p.gamma >= 1.0 {
            return Err(invalid("entropic.gamma", "planning needs gamma < 1"));
        }
        self.clocks
            .ticks(g.cols())
            .map_err(|err| invalid("clocks", err.to_string()))?;
        let ps = self.transitions.p_success;
        if !(ps > 0.0 && ps <= 1.0) {
            return Err(invalid("transitions.p_success", format!("must lie in (0, 1], got {ps}")));
        }
        let s = &self.sampling;
        if s.policies == 0 || s.per_policy == 0 || s.inner == 0 {
            return Err(invalid("sampling", "policies, per_policy and inner must be positive"));
        }
        if !(s.tol > 0.0) || s.max_iters == 0 {
            return Err(invalid("sampling", "tol and max_iters must be positive"));
        }
        if !(self.fcu.tube_radius >= 0.0 && self.fcu.tube_radius.is_finite()) {
            return Err(invalid("fcu.tube_radius", "must be non-negative"));
        }
        if !(self.duration.is_finite() && self.duration > self.clocks.dt) {
            return Err(invalid("duration", format!("must exceed dt, got {}", self.duration)));
        }
        Ok(())
    }
}

/// Parses and validates a scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, SimError> {
    if text.trim().is_empty() {
        return Err(SimError::MissingFields(
            REQUIRED_KEYS.iter().map(|s| s.to_string()).collect(),
        ));
    }
    let value: Value = serde_json::from_str(text).map_err(|e| SimError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Object(map) = &value else {
        return Err(invalid("<root>", "expected a JSON object"));
    };
    let missing: Vec<String> = REQUIRED_KEYS
        .iter()
        .filter(|k| !map.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(SimError::MissingFields(missing));
    }
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| SimError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads, parses and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::ConfigIo {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

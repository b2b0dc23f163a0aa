use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use super::SimError;
use crate::fcu::{road_col, ClockTicks, RiskSet};
use crate::mdp::{make_transitions, next_cell, CellId, GridGeometry, LocalMdp, TransitionModel};
use crate::rau::{
    build_reward_model, classify_with_goal_fallback, predict_occupancy, OccupancyForecast, ParticipantState,
    RiskField,
};
use crate::risk_q::{
    collect_samples, greedy_policy, random_policies, solve_sampled_program, top_up_coverage, EntropicParams,
    PlanPolicy, QTableFile,
};
use crate::vehicle::{solve_vehicle_lqr, waypoints_to_reference, EgoState, LqrGain, ReferenceTrajectory};

/// Validated scenario with everything that does not change during an episode.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub grid: GridGeometry,
    pub transitions: TransitionModel,
    pub gain: LqrGain,
    pub ticks: ClockTicks,
    pub entropic: EntropicParams,
    pub participants: Vec<ParticipantState>,
    pub preferred_lane: usize,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let grid = cfg.geometry()?;
        let transitions = make_transitions(cfg.transitions.p_success, &grid)?;
        let gain = solve_vehicle_lqr(&cfg.ego.vehicle, &cfg.ego.lqr)?;
        let ticks = cfg.clocks.ticks(grid.cols())?;
        let entropic = cfg.entropic_params()?;
        let participants = cfg.participants.iter().map(|p| p.state()).collect();
        let preferred_lane = cfg.preferred_lane(&grid);
        Ok(Scenario {
            cfg,
            grid,
            transitions,
            gain,
            ticks,
            entropic,
            participants,
            preferred_lane,
        })
    }

    pub fn speed(&self) -> f64 {
        self.cfg.ego.vehicle.v_t
    }

    pub fn tau_env(&self) -> f64 {
        self.cfg.clocks.tau_env
    }

    /// Participants in the road frame at time `t`.
    pub fn participants_at(&self, t: f64) -> Vec<ParticipantState> {
        self.participants
            .iter()
            .map(|p| {
                let (x, y) = p.position_at(t);
                ParticipantState { x, y, ..*p }
            })
            .collect()
    }

    /// Grid window anchored at the ego's road column, with its forecast,
    /// classification and risky set.
    pub fn environment(&self, t: f64, ego: &EgoState) -> Result<Epoch, SimError> {
        let g = &self.grid;
        let origin_col = road_col(g, ego.x).unwrap_or(0);
        let origin_x = origin_col as f64 * g.cell_length();
        // Only participants overlapping the window are previewed.
        let window: Vec<ParticipantState> = self
            .participants_at(t)
            .iter()
            .map(|p| p.translated(-origin_x, 0.0))
            .filter(|p| p.x + 0.5 * p.length > 0.0 && p.x - 0.5 * p.length < g.length())
            .collect();
        let forecast = predict_occupancy(
            &window,
            g,
            self.cfg.risk.lookahead,
            self.tau_env(),
            self.cfg.risk.sigma_growth,
        )?;
        let mut epoch = Epoch {
            t,
            origin_col,
            forecast,
            field: None,
            risk: RiskSet::empty(),
        };
        let field = epoch.classify(self, ego)?;
        epoch.risk = RiskSet::from_field(&field, origin_col);
        epoch.field = Some(field);
        Ok(epoch)
    }

    /// Environment and first plan at `t = 0`, with the episode's random stream for `seed`.
    pub fn first_plan(&self, seed: u64) -> Result<(Epoch, Plan), SimError> {
        let ego = self.cfg.ego.initial_state();
        let epoch = self.environment(0.0, &ego)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plan = self.plan(1, 0.0, &ego, &epoch, &mut rng)?;
        Ok((epoch, plan))
    }

    /// Solves the local problem of `epoch` from the ego's current cell and
    /// follows the greedy policy's intended moves over one window length.
    pub fn plan<R: RngCore>(
        &self,
        id: usize,
        t: f64,
        ego: &EgoState,
        epoch: &Epoch,
        rng: &mut R,
    ) -> Result<Plan, SimError> {
        let g = &self.grid;
        let field = epoch.classify(self, ego)?;
        let ego_cell = field.ego();
        let rewards = build_reward_model(&field, g, &self.transitions, &self.cfg.rewards)?;
        let mdp = LocalMdp::new(
            g.clone(),
            self.transitions.clone(),
            rewards,
            self.entropic.gamma,
            ego_cell,
            field.goals().to_vec(),
        )?;
        let s = &self.cfg.sampling;
        let n = g.cell_count();
        let policies = random_policies(n, s.policies, g.cols(), rng);
        let mut set = collect_samples(&self.transitions, &mdp, &policies, s.per_policy, s.inner, s.dedup, rng)?;
        let topped_up = top_up_coverage(&mut set, &self.transitions, &mdp, &policies[0], s.top_up, rng);
        let sol = solve_sampled_program(&set, &self.transitions, None, self.entropic, s.tol, s.max_iters)?;
        let policy = greedy_policy(&sol.q, &self.transitions, &sol.costs, self.entropic, g.cols())?;

        let mut cells = vec![ego_cell];
        let mut cell = ego_cell;
        for _ in 0..g.cols() {
            cell = next_cell(cell, policy.action(g.index(cell)), g);
            cells.push(cell);
        }
        let tau = self.tau_env();
        let waypoints: Vec<(CellId, f64)> = cells
            .iter()
            .enumerate()
            .map(|(k, c)| (CellId::new(c.row, c.col + epoch.origin_col), t + k as f64 * tau))
            .collect();
        let reference = waypoints_to_reference(&waypoints, g, ego.x, self.speed())?;
        let qtable = QTableFile::new(&sol.q, g.rows(), g.cols(), self.entropic)?;
        Ok(Plan {
            id,
            t,
            origin_col: epoch.origin_col,
            waypoints,
            policy,
            reference,
            accepted: RiskSet::from_field(&field, epoch.origin_col),
            qtable,
            samples: set.tuples.len(),
            topped_up,
            iterations: sol.iterations,
            max_violation: sol.max_violation,
            residual: sol.residual,
        })
    }
}

/// Environment snapshot for one `tau_env` period.
#[derive(Debug, Clone)]
pub struct Epoch {
    pub t: f64,
    /// Road column of the window's first column.
    pub origin_col: usize,
    pub forecast: OccupancyForecast,
    pub field: Option<RiskField>,
    /// Risky cells of `field` in the road frame, fixed until the next epoch.
    pub risk: RiskSet,
}

impl Epoch {
    /// Window cell of the ego, clamped into the window and the lane rows.
    pub fn ego_cell(&self, sc: &Scenario, ego: &EgoState) -> CellId {
        let g = &sc.grid;
        let (lo, hi) = g.lane_row_bounds();
        let row = g.row_at_clamped(ego.y).clamp(lo, hi);
        let col = road_col(g, ego.x)
            .unwrap_or(0)
            .saturating_sub(self.origin_col)
            .min(g.cols() - 1);
        CellId::new(row, col)
    }

    /// Classification of this epoch's forecast with the ego at its current cell.
    pub fn classify(&self, sc: &Scenario, ego: &EgoState) -> Result<RiskField, SimError> {
        Ok(classify_with_goal_fallback(
            &self.forecast,
            &sc.grid,
            self.ego_cell(sc, ego),
            sc.preferred_lane,
            sc.cfg.risk.thresholds(),
            sc.cfg.risk.lookahead,
        )?)
    }
}

/// One solved plan and its rollout.
#[derive(Debug, Clone)]
pub struct Plan {
    pub id: usize,
    pub t: f64,
    pub origin_col: usize,
    /// Road-frame cells with their timestamps.
    pub waypoints: Vec<(CellId, f64)>,
    pub policy: PlanPolicy,
    pub reference: ReferenceTrajectory,
    /// Risky cells of the classification the plan was solved on; the monitor
    /// only flags risk outside it.
    pub accepted: RiskSet,
    pub qtable: QTableFile,
    pub samples: usize,
    pub topped_up: usize,
    pub iterations: usize,
    pub max_violation: f64,
    pub residual: f64,
}

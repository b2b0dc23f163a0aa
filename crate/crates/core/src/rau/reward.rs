use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{RauError, RiskField, TruncExpParams};
use crate::mdp::{next_cell, GridGeometry, HighLevelAction, SafetyState, TransitionModel};

/// Law of the reward collected on entering a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardDistribution {
    PointMass { value: f64 },
    TruncExp { params: TruncExpParams },
}

impl RewardDistribution {
    pub fn point(value: f64) -> Self {
        RewardDistribution::PointMass { value }
    }

    pub fn mean(&self) -> f64 {
        match self {
            RewardDistribution::PointMass { value } => *value,
            RewardDistribution::TruncExp { params } => params.mean(),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, RewardDistribution::PointMass { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_reward(self, rng)
    }
}

/// One reward realization.
pub fn sample_reward<R: Rng + ?Sized>(dist: &RewardDistribution, rng: &mut R) -> f64 {
    match dist {
        RewardDistribution::PointMass { value } => *value,
        RewardDistribution::TruncExp { params } => params.sample(rng),
    }
}

/// Reward magnitudes and penalty laws per safety state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    /// Reward for entering an unsafe cell; negative.
    #[serde(rename = "M")]
    pub unsafe_reward: f64,
    /// Reward for entering a goal cell; positive.
    #[serde(rename = "Gamma")]
    pub goal_reward: f64,
    pub hr: TruncExpParams,
    pub lr: TruncExpParams,
    /// Replace the truncated-exponential laws by point masses at their means.
    #[serde(default)]
    pub deterministic: bool,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            unsafe_reward: -10_000.0,
            goal_reward: 10_000.0,
            hr: TruncExpParams {
                tau_l: 10_000.0,
                tau_h: 0.0,
                sigma: 1.0,
            },
            lr: TruncExpParams {
                tau_l: 10.0,
                tau_h: 0.0,
                sigma: 1.0,
            },
            deterministic: false,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), RauError> {
        if !(self.unsafe_reward < 0.0 && self.unsafe_reward.is_finite()) {
            return Err(RauError::BadParams(format!(
                "M must be negative and finite, got {}",
                self.unsafe_reward
            )));
        }
        if !(self.goal_reward > 0.0 && self.goal_reward.is_finite()) {
            return Err(RauError::BadParams(format!(
                "Gamma must be positive and finite, got {}",
                self.goal_reward
            )));
        }
        self.hr.validate()?;
        self.lr.validate()
    }

    /// Distribution attached to entering a cell in state `s`.
    pub fn distribution_for(&self, s: SafetyState) -> RewardDistribution {
        let trunc = |params: TruncExpParams| {
            if self.deterministic {
                RewardDistribution::point(params.mean())
            } else {
                RewardDistribution::TruncExp { params }
            }
        };
        match s {
            SafetyState::Safe | SafetyState::Current => RewardDistribution::point(0.0),
            SafetyState::Unsafe => RewardDistribution::point(self.unsafe_reward),
            SafetyState::HighRisk => trunc(self.hr),
            SafetyState::LowRisk => trunc(self.lr),
            SafetyState::Goal => RewardDistribution::point(self.goal_reward),
        }
    }
}

/// Previewed rewards for one local MDP.
///
/// Rewards are attached to cells and collected on entry. For a pair `(s, a)`
/// the tagged distribution is that of the intended successor, and the mean
/// reward `g_a(s)` averages the successor means under the transition model.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    states: Vec<SafetyState>,
    cells: Vec<RewardDistribution>,
    tags: Vec<RewardDistribution>,
    mean_rewards: Vec<f64>,
}

impl RewardModel {
    /// Builds a model from explicit per-cell states and distributions.
    ///
    /// `intended[s * 3 + a]` is the intended successor of `(s, a)`.
    pub fn from_cells(
        states: Vec<SafetyState>,
        cells: Vec<RewardDistribution>,
        intended: &[usize],
        transitions: &TransitionModel,
    ) -> Result<Self, RauError> {
        let n = states.len();
        let na = HighLevelAction::COUNT;
        if cells.len() != n || transitions.n_states() != n || intended.len() != n * na {
            return Err(RauError::GeometryMismatch);
        }
        let mut tags = Vec::with_capacity(n * na);
        let mut mean_rewards = Vec::with_capacity(n * na);
        for s in 0..n {
            for a in 0..na {
                let target = intended[s * na + a];
                if target >= n {
                    return Err(RauError::GeometryMismatch);
                }
                tags.push(cells[target]);
                let g: f64 = transitions
                    .successors(s, a)
                    .iter()
                    .map(|&(s2, p)| p * cells[s2].mean())
                    .sum();
                mean_rewards.push(g);
            }
        }
        Ok(RewardModel {
            states,
            cells,
            tags,
            mean_rewards,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn field_states(&self) -> &[SafetyState] {
        &self.states
    }

    pub fn cell_distribution(&self, cell: usize) -> &RewardDistribution {
        &self.cells[cell]
    }

    /// Distribution tagged to `(s, a)` by the intended successor's state.
    pub fn distribution(&self, s: usize, a: usize) -> &RewardDistribution {
        &self.tags[s * HighLevelAction::COUNT + a]
    }

    /// Mean reward `g_a(s)`.
    pub fn mean_reward(&self, s: usize, a: usize) -> f64 {
        self.mean_rewards[s * HighLevelAction::COUNT + a]
    }

    /// Mean cost table, `-g_a(s)` laid out as `s * 3 + a`.
    pub fn mean_costs(&self) -> Vec<f64> {
        self.mean_rewards.iter().map(|g| -g).collect()
    }

    /// One cost realization for `(s, a)`: every successor cell's reward is
    /// drawn independently and averaged under the transition model.
    pub fn sample_cost<R: Rng + ?Sized>(
        &self,
        s: usize,
        a: usize,
        transitions: &TransitionModel,
        rng: &mut R,
    ) -> f64 {
        let reward: f64 = transitions
            .successors(s, a)
            .iter()
            .map(|&(s2, p)| p * self.cells[s2].sample(rng))
            .sum();
        -reward
    }

    /// True when no reward is random.
    pub fn is_deterministic(&self) -> bool {
        self.cells.iter().all(RewardDistribution::is_deterministic)
    }
}

/// Assigns a reward law to every cell from its safety state.
pub fn build_reward_model(
    field: &RiskField,
    g: &GridGeometry,
    transitions: &TransitionModel,
    params: &RewardParams,
) -> Result<RewardModel, RauError> {
    params.validate()?;
    if !field.matches(g) || transitions.n_states() != g.cell_count() {
        return Err(RauError::GeometryMismatch);
    }
    let states = field.states().to_vec();
    let cells = states.iter().map(|&s| params.distribution_for(s)).collect();
    let mut intended = Vec::with_capacity(g.cell_count() * HighLevelAction::COUNT);
    for c in g.cells() {
        for a in HighLevelAction::ALL {
            intended.push(g.index(next_cell(c, a, g)));
        }
    }
    RewardModel::from_cells(states, cells, &intended, transitions)
}

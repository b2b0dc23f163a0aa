//! Entropic risk-averse Q-learning over a local MDP.
//!
//! All quantities are costs: rewards from the reward model enter negated, so
//! the goal carries a large negative cost and unsafe cells a large positive
//! one, and every operator minimizes.

mod bound;
mod entropic;
mod operators;
mod policy;
mod program;
mod qtable_io;
mod sampling;

use thiserror::Error;

pub use bound::sample_bound;
pub use entropic::{discounted_cost, entropic_aggregate, entropic_value, mean_variance_approx};
pub use operators::{
    bellman_apply, evaluate_policy, optimal_bellman, value_iterate, EntropicParams, FixedPoint,
    PlanPolicy, QTable, WeightFn,
};
pub use policy::greedy_policy;
pub use program::{solve_sampled_program, ProgramSolution};
pub use qtable_io::{read_qtable, write_qtable, QTableFile};
pub use sampling::{
    collect_samples, random_policies, top_up_coverage, CostSampler, SampleSet, SampleTuple,
    TableCosts,
};

#[derive(Debug, Error, PartialEq)]
pub enum RiskError {
    #[error("invalid parameter: {0}")]
    BadParams(String),
    #[error("invalid weight function: {0}")]
    BadWeights(String),
    #[error("table, transition and cost shapes disagree")]
    ShapeMismatch,
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("upsilon * gamma = {upsilon} * {gamma} must be below 1 for certified convergence")]
    ContractionBudget { upsilon: f64, gamma: f64 },
    #[error("no convergence after {iterations} iterations (last change {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("insufficient coverage: {} state-action pairs have no samples", .0.len())]
    InsufficientCoverage(Vec<(usize, usize)>),
    #[error("bound certificate failed: residual {residual}, worst constraint violation {max_violation}")]
    BoundCertificateFailed { residual: f64, max_violation: f64 },
    #[error("malformed QTable file: {0}")]
    Format(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

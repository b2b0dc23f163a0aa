use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::episode::{run_episode, Episode};
use super::planner::Scenario;
use super::SimError;
use crate::fcu::Label;

/// Across-run lateral statistics at one α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub alpha: f64,
    pub runs: usize,
    pub seeds: Vec<u64>,
    /// Timesteps shared by every run.
    pub t: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_q10: Vec<f64>,
    pub y_q90: Vec<f64>,
    /// Unbiased across-run variance of `Y` per timestep (0 for one run).
    pub y_variance: Vec<f64>,
    /// Mean of `y_variance` over the timesteps.
    pub aggregate_y_variance: f64,
    pub collision_count: usize,
    pub safety_violations: usize,
    pub replan_count: usize,
    pub plan_count: usize,
    pub saturation_events: u64,
    pub episode_wall_time: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data (`h = (n-1)·p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Statistics of the lateral position over the timesteps common to all runs.
pub fn summarize(alpha: f64, episodes: &[Episode]) -> RunSummary {
    assert!(!episodes.is_empty(), "summaries need at least one episode");
    let len = episodes.iter().map(|e| e.trace.len()).min().unwrap_or(0);
    let n = episodes.len();
    let mut s = RunSummary {
        alpha,
        runs: n,
        seeds: episodes.iter().map(|e| e.seed).collect(),
        t: Vec::with_capacity(len),
        y_mean: Vec::with_capacity(len),
        y_q10: Vec::with_capacity(len),
        y_q90: Vec::with_capacity(len),
        y_variance: Vec::with_capacity(len),
        aggregate_y_variance: 0.0,
        collision_count: episodes.iter().map(|e| e.collisions()).sum(),
        safety_violations: episodes.iter().filter(|e| e.violation.is_some()).count(),
        replan_count: episodes.iter().map(|e| e.count(Label::Rpl)).sum(),
        plan_count: episodes.iter().map(|e| e.plans.len()).sum(),
        saturation_events: episodes.iter().map(|e| e.saturation_events).sum(),
        episode_wall_time: episodes.iter().map(|e| e.wall_time).collect(),
    };
    let mut ys = vec![0.0; n];
    for k in 0..len {
        for (y, e) in ys.iter_mut().zip(episodes) {
            *y = e.trace[k].state.y;
        }
        let mean = ys.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        ys.sort_by(f64::total_cmp);
        s.t.push(episodes[0].trace[k].t);
        s.y_mean.push(mean);
        s.y_q10.push(quantile_sorted(&ys, 0.1));
        s.y_q90.push(quantile_sorted(&ys, 0.9));
        s.y_variance.push(var);
    }
    if len > 0 {
        s.aggregate_y_variance = s.y_variance.iter().sum::<f64>() / len as f64;
    }
    s
}

/// Episodes for seeds `cfg.seed + i`, run concurrently.
pub fn run_batch(sc: &Scenario, runs: usize) -> Result<Vec<Episode>, SimError> {
    (0..runs as u64)
        .into_par_iter()
        .map(|i| run_episode(sc, sc.cfg.seed.wrapping_add(i)))
        .collect()
}

/// One summary per α, all other settings as in `cfg`.
pub fn monte_carlo(
    cfg: &ScenarioConfig,
    runs: usize,
    alphas: &[f64],
) -> Result<Vec<(RunSummary, Vec<Episode>)>, SimError> {
    if runs < 2 {
        return Err(SimError::Invalid {
            field: "runs".into(),
            message: format!("a batch needs at least two runs, got {runs}"),
        });
    }
    alphas
        .iter()
        .map(|&alpha| {
            let mut c = cfg.clone();
            c.entropic.alpha = alpha;
            let sc = Scenario::new(c)?;
            let episodes = run_batch(&sc, runs)?;
            Ok((summarize(alpha, &episodes), episodes))
        })
        .collect()
}

use super::operators::{optimal_bellman, EntropicParams, PlanPolicy, QTable};
use super::RiskError;
use crate::mdp::{HighLevelAction, TransitionModel};

/// Relative gap below which two lookahead values count as tied.
const TIE_RTOL: f64 = 1e-12;

/// Per cell, the action minimizing the one-step entropic lookahead.
///
/// Ties go to the first action in [`HighLevelAction::TIE_ORDER`], so straight
/// ahead wins an exact tie.
pub fn greedy_policy(
    q: &QTable,
    transitions: &TransitionModel,
    costs: &[f64],
    p: EntropicParams,
    horizon: usize,
) -> Result<PlanPolicy, RiskError> {
    if !q.is_finite() {
        return Err(RiskError::NonFinite(f64::NAN));
    }
    let look = optimal_bellman(q, transitions, costs, p)?;
    let actions = (0..q.n_states())
        .map(|s| {
            let mut best = HighLevelAction::TIE_ORDER[0];
            let mut best_v = look.get(s, best.index());
            for &a in &HighLevelAction::TIE_ORDER[1..] {
                let v = look.get(s, a.index());
                if v < best_v - TIE_RTOL * best_v.abs().max(1.0) {
                    best = a;
                    best_v = v;
                }
            }
            best
        })
        .collect();
    Ok(PlanPolicy { actions, horizon })
}

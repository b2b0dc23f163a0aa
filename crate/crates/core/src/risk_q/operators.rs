use serde::{Deserialize, Serialize};

use super::entropic::entropic_aggregate;
use super::RiskError;
use crate::mdp::{HighLevelAction, TransitionModel};

const NA: usize = HighLevelAction::COUNT;

/// Risk factor and discount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropicParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl EntropicParams {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self, RiskError> {
        let p = EntropicParams { alpha, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(RiskError::BadParams(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(RiskError::BadParams(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// State weights `w(s) >= 1` and their contraction budget `Υ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFn {
    w: Vec<f64>,
    upsilon: f64,
}

impl WeightFn {
    /// `w ≡ 1`, `Υ = 1`.
    pub fn uniform(n_states: usize) -> Self {
        WeightFn {
            w: vec![1.0; n_states],
            upsilon: 1.0,
        }
    }

    /// Checks `w >= 1` and `max_a E[w(s')] <= Υ·w(s)` for every state.
    pub fn new(w: Vec<f64>, upsilon: f64, transitions: &TransitionModel) -> Result<Self, RiskError> {
        if w.len() != transitions.n_states() {
            return Err(RiskError::ShapeMismatch);
        }
        if !(upsilon > 0.0 && upsilon.is_finite()) {
            return Err(RiskError::BadWeights(format!("upsilon must be positive, got {upsilon}")));
        }
        if let Some((s, v)) = w.iter().enumerate().find(|(_, v)| !(**v >= 1.0 && v.is_finite())) {
            return Err(RiskError::BadWeights(format!("w({s}) = {v} is below 1")));
        }
        for s in 0..w.len() {
            for a in 0..NA {
                let ew: f64 = transitions.successors(s, a).iter().map(|&(s2, p)| p * w[s2]).sum();
                if ew > upsilon * w[s] * (1.0 + 1e-12) {
                    return Err(RiskError::BadWeights(format!(
                        "E[w(s')] = {ew} exceeds upsilon * w({s}) = {}",
                        upsilon * w[s]
                    )));
                }
            }
        }
        Ok(WeightFn { w, upsilon })
    }

    pub fn upsilon(&self) -> f64 {
        self.upsilon
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// `max_{s,a} |Q1 - Q2| / w(s)`.
    pub fn distance(&self, q1: &QTable, q2: &QTable) -> f64 {
        q1.values
            .chunks_exact(NA)
            .zip(q2.values.chunks_exact(NA))
            .zip(&self.w)
            .flat_map(|((r1, r2), w)| r1.iter().zip(r2).map(move |(a, b)| (a - b).abs() / w))
            .fold(0.0, f64::max)
    }
}

/// Tabular cost-to-go values indexed by `(state, action)`, laid out `s * 3 + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn filled(n_states: usize, value: f64) -> Self {
        QTable {
            n_states,
            values: vec![value; n_states * NA],
        }
    }

    pub fn from_values(n_states: usize, values: Vec<f64>) -> Result<Self, RiskError> {
        if values.len() != n_states * NA {
            return Err(RiskError::ShapeMismatch);
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(RiskError::NonFinite(*v));
        }
        Ok(QTable { n_states, values })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * NA + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * NA + a] = v;
    }

    /// `min_a Q(s, a)`.
    pub fn state_min(&self, s: usize) -> f64 {
        self.values[s * NA..(s + 1) * NA]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Unweighted sup-norm distance.
    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A stationary plan: one action per cell, with the rollout horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanPolicy {
    pub actions: Vec<HighLevelAction>,
    pub horizon: usize,
}

impl PlanPolicy {
    pub fn uniform(n_states: usize, a: HighLevelAction, horizon: usize) -> Self {
        PlanPolicy {
            actions: vec![a; n_states],
            horizon,
        }
    }

    pub fn action(&self, s: usize) -> HighLevelAction {
        self.actions[s]
    }
}

fn check_shapes(q: &QTable, transitions: &TransitionModel, costs: &[f64]) -> Result<(), RiskError> {
    if q.n_states != transitions.n_states() || costs.len() != q.values.len() {
        return Err(RiskError::ShapeMismatch);
    }
    Ok(())
}

/// `c(s,a) + (1/α) log Σ_{s'} P̄(s'|s,a) exp(α γ v(s'))` for every pair.
fn apply_with<F: Fn(usize) -> f64>(
    n_states: usize,
    transitions: &TransitionModel,
    costs: &[f64],
    p: EntropicParams,
    next_value: F,
) -> QTable {
    let mut values = Vec::with_capacity(n_states * NA);
    for s in 0..n_states {
        for a in 0..NA {
            let succ = transitions.successors(s, a);
            let risk = entropic_aggregate(
                succ.iter().map(|&(s2, pr)| (pr, p.gamma * next_value(s2))),
                p.alpha,
            );
            values.push(costs[s * NA + a] + risk);
        }
    }
    QTable { n_states, values }
}

/// Risk Bellman operator for a fixed policy.
pub fn bellman_apply(
    q: &QTable,
    policy: &PlanPolicy,
    transitions: &TransitionModel,
    costs: &[f64],
    p: EntropicParams,
) -> Result<QTable, RiskError> {
    check_shapes(q, transitions, costs)?;
    if policy.actions.len() != q.n_states {
        return Err(RiskError::ShapeMismatch);
    }
    Ok(apply_with(q.n_states, transitions, costs, p, |s2| {
        q.get(s2, policy.action(s2).index())
    }))
}

/// Optimal risk Bellman operator: successor values are `min_{a'} Q(s', a')`.
pub fn optimal_bellman(
    q: &QTable,
    transitions: &TransitionModel,
    costs: &[f64],
    p: EntropicParams,
) -> Result<QTable, RiskError> {
    check_shapes(q, transitions, costs)?;
    Ok(apply_with(q.n_states, transitions, costs, p, |s2| q.state_min(s2)))
}

/// Output of a fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub q: QTable,
    pub iterations: usize,
    /// A posteriori bound on the weighted distance to the true fixed point.
    pub error_bound: f64,
}

fn iterate<F>(
    q0: &QTable,
    weights: &WeightFn,
    gamma: f64,
    tol: f64,
    max_iters: usize,
    mut step: F,
) -> Result<FixedPoint, RiskError>
where
    F: FnMut(&QTable) -> Result<QTable, RiskError>,
{
    if !(tol > 0.0) {
        return Err(RiskError::BadParams(format!("tol must be positive, got {tol}")));
    }
    let k = weights.upsilon() * gamma;
    if k >= 1.0 {
        return Err(RiskError::ContractionBudget {
            upsilon: weights.upsilon(),
            gamma,
        });
    }
    let mut q = q0.clone();
    let mut change = f64::INFINITY;
    for it in 1..=max_iters {
        let next = step(&q)?;
        change = weights.distance(&next, &q);
        q = next;
        if !q.is_finite() {
            return Err(RiskError::NonFinite(f64::NAN));
        }
        if change <= tol {
            return Ok(FixedPoint {
                q,
                iterations: it,
                error_bound: change * k / (1.0 - k),
            });
        }
    }
    Err(RiskError::NoConvergence {
        iterations: max_iters,
        residual: change,
    })
}

/// Iterates the optimal operator from `q0` until the weighted change is at
/// most `tol`.
pub fn value_iterate(
    q0: &QTable,
    transitions: &TransitionModel,
    costs: &[f64],
    p: EntropicParams,
    weights: &WeightFn,
    tol: f64,
    max_iters: usize,
) -> Result<FixedPoint, RiskError> {
    p.validate()?;
    check_shapes(q0, transitions, costs)?;
    if weights.weights().len() != q0.n_states {
        return Err(RiskError::ShapeMismatch);
    }
    iterate(q0, weights, p.gamma, tol, max_iters, |q| {
        optimal_bellman(q, transitions, costs, p)
    })
}

/// `Q^π`, the fixed point of the policy operator.
pub fn evaluate_policy(
    policy: &PlanPolicy,
    transitions: &TransitionModel,
    costs: &[f64],
    p: EntropicParams,
    tol: f64,
    max_iters: usize,
) -> Result<FixedPoint, RiskError> {
    p.validate()?;
    let n = transitions.n_states();
    let q0 = QTable::filled(n, 0.0);
    check_shapes(&q0, transitions, costs)?;
    iterate(&q0, &WeightFn::uniform(n), p.gamma, tol, max_iters, |q| {
        bellman_apply(q, policy, transitions, costs, p)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Every action of every state moves to `next[s]` deterministically.
    fn chain(next: &[usize]) -> TransitionModel {
        let rows = next
            .iter()
            .flat_map(|&n| std::iter::repeat_n(vec![(n, 1.0)], NA))
            .collect();
        TransitionModel::from_rows(next.len(), rows).unwrap()
    }

    fn params(alpha: f64, gamma: f64) -> EntropicParams {
        EntropicParams::new(alpha, gamma).unwrap()
    }

    #[test]
    fn self_loop_geometric_fixed_point() {
        let t = chain(&[0]);
        let costs = vec![1.0; 3];
        for alpha in [0.0, 0.2, 3.0] {
            let fp = value_iterate(
                &QTable::filled(1, 0.0),
                &t,
                &costs,
                params(alpha, 0.3),
                &WeightFn::uniform(1),
                1e-14,
                1000,
            )
            .unwrap();
            for a in 0..NA {
                assert!((fp.q.get(0, a) - 1.0 / 0.7).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_costs_stay_zero() {
        let t = chain(&[1, 1]);
        let q = QTable::filled(2, 0.0);
        let costs = vec![0.0; 6];
        let policy = PlanPolicy::uniform(2, HighLevelAction::Sec2, 2);
        let out = bellman_apply(&q, &policy, &t, &costs, params(0.2, 0.3)).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
        let fp = value_iterate(&q, &t, &costs, params(0.2, 0.3), &WeightFn::uniform(2), 1e-12, 10)
            .unwrap();
        assert_eq!(fp.iterations, 1);
    }

    #[test]
    fn two_successor_lottery() {
        // State 0 reaches states 1 and 2 with probability 1/2; Q(1) = 0, Q(2) = 10.
        let mut rows = vec![vec![(1, 0.5), (2, 0.5)]; NA];
        rows.extend(std::iter::repeat_n(vec![(1, 1.0)], NA));
        rows.extend(std::iter::repeat_n(vec![(2, 1.0)], NA));
        let t = TransitionModel::from_rows(3, rows).unwrap();
        let mut q = QTable::filled(3, 0.0);
        for a in 0..NA {
            q.set(2, a, 10.0);
        }
        let policy = PlanPolicy::uniform(3, HighLevelAction::Sec2, 1);
        let out = bellman_apply(&q, &policy, &t, &[0.0; 9], params(0.2, 1.0)).unwrap();
        let exact = 5.0 * ((1.0 + 2f64.exp()) / 2.0).ln();
        assert!((out.get(0, 0) - exact).abs() < 1e-12);
    }

    #[test]
    fn risk_discrimination() {
        // States: 0 decision, 1 sink. Action Sec1 (A) costs 1 deterministically.
        // Action Sec2 (B) moves to 2 or 3 with probability 1/2; leaving 2 costs
        // 0 and leaving 3 costs 2, both then absorbed in the sink.
        let sink = vec![(1, 1.0)];
        let rows = vec![
            sink.clone(),
            vec![(2, 0.5), (3, 0.5)],
            sink.clone(),
            sink.clone(),
            sink.clone(),
            sink.clone(),
            sink.clone(),
            sink.clone(),
            sink.clone(),
            sink.clone(),
            sink.clone(),
            sink.clone(),
        ];
        let t = TransitionModel::from_rows(4, rows).unwrap();
        let mut costs = vec![0.0; 12];
        costs[0] = 1.0;
        costs[1] = 0.0;
        costs[2] = 10.0;
        for a in 0..NA {
            costs[3 * NA + a] = 2.0;
        }
        // gamma = 1 is rejected by value iteration; iterate the operator by hand.
        let p = params(0.2, 1.0);
        let mut q = QTable::filled(4, 0.0);
        for _ in 0..5 {
            q = optimal_bellman(&q, &t, &costs, p).unwrap();
        }
        let expect_b = 5.0 * ((1.0 + 0.4f64.exp()) / 2.0).ln();
        assert!((q.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((q.get(0, 1) - expect_b).abs() < 1e-12);
        assert!((q.get(0, 1) - 1.099_340_359).abs() < 1e-9);
        let p0 = params(0.0, 1.0);
        let mut q = QTable::filled(4, 0.0);
        for _ in 0..5 {
            q = optimal_bellman(&q, &t, &costs, p0).unwrap();
        }
        assert!((q.get(0, 0) - q.get(0, 1)).abs() < 1e-12);
    }

    #[test]
    fn two_state_chain_matches_linear_solution() {
        // 0 -> 1 -> 0, costs c0 = 2, c1 = -1:
        // Q0 = 2 + γ Q1, Q1 = -1 + γ Q0  =>  Q0 = (2 - γ) / (1 - γ²).
        let t = chain(&[1, 0]);
        let costs = vec![2.0, 2.0, 2.0, -1.0, -1.0, -1.0];
        let g = 0.3;
        let fp = value_iterate(
            &QTable::filled(2, 0.0),
            &t,
            &costs,
            params(0.2, g),
            &WeightFn::uniform(2),
            1e-13,
            1000,
        )
        .unwrap();
        let q0 = (2.0 - g) / (1.0 - g * g);
        let q1 = (-1.0 + 2.0 * g) / (1.0 - g * g);
        assert!((fp.q.get(0, 0) - q0).abs() < 1e-10);
        assert!((fp.q.get(1, 2) - q1).abs() < 1e-10);
    }

    #[test]
    fn rejects_contraction_budget_of_one() {
        let t = chain(&[0]);
        let q = QTable::filled(1, 0.0);
        let err = value_iterate(&q, &t, &[1.0; 3], params(0.2, 1.0), &WeightFn::uniform(1), 1e-9, 10);
        assert!(matches!(err, Err(RiskError::ContractionBudget { .. })));
    }

    #[test]
    fn reports_non_convergence() {
        let t = chain(&[0]);
        let q = QTable::filled(1, 0.0);
        let err = value_iterate(&q, &t, &[1.0; 3], params(0.2, 0.99), &WeightFn::uniform(1), 1e-12, 3);
        assert!(matches!(err, Err(RiskError::NoConvergence { iterations: 3, .. })));
    }

    #[test]
    fn weight_function_validation() {
        let t = chain(&[1, 1]);
        assert!(WeightFn::new(vec![1.0, 2.0], 2.0, &t).is_ok());
        assert!(WeightFn::new(vec![1.0, 2.0], 1.5, &t).is_err());
        assert!(WeightFn::new(vec![0.5, 1.0], 2.0, &t).is_err());
    }

    fn random_problem() -> impl Strategy<Value = (TransitionModel, Vec<f64>)> {
        (2usize..8).prop_flat_map(|n| {
            let rows = proptest::collection::vec(
                proptest::collection::vec((0..n, 0.05f64..1.0), 1..4),
                n * NA,
            );
            let costs = proptest::collection::vec(-50.0f64..50.0, n * NA);
            (rows, costs).prop_map(move |(rows, costs)| {
                let rows = rows
                    .into_iter()
                    .map(|row| {
                        let total: f64 = row.iter().map(|e| e.1).sum();
                        row.into_iter().map(|(s, w)| (s, w / total)).collect()
                    })
                    .collect();
                (TransitionModel::from_rows(n, rows).unwrap(), costs)
            })
        })
    }

    proptest! {
        #[test]
        fn optimal_operator_is_monotone_and_contracting(
            (t, costs) in random_problem(),
            seed in proptest::collection::vec(-100.0f64..100.0, 8 * NA),
            bump in proptest::collection::vec(0.0f64..50.0, 8 * NA),
            alpha in 0.0f64..1.0,
        ) {
            let n = t.n_states();
            let q1 = QTable::from_values(n, seed[..n * NA].to_vec()).unwrap();
            let q2 = QTable::from_values(
                n,
                q1.values().iter().zip(&bump).map(|(a, b)| a + b).collect(),
            ).unwrap();
            let p = EntropicParams::new(alpha, 0.3).unwrap();
            let t1 = optimal_bellman(&q1, &t, &costs, p).unwrap();
            let t2 = optimal_bellman(&q2, &t, &costs, p).unwrap();
            for (a, b) in t1.values().iter().zip(t2.values()) {
                prop_assert!(a <= b);
            }
            prop_assert!(t1.sup_distance(&t2) <= 0.3 * q1.sup_distance(&q2) * (1.0 + 1e-12) + 1e-12);
        }

        /// Any Q with Q <= T̂Q lies below Q^π.
        #[test]
        fn subsolutions_lie_below_policy_value(
            (t, costs) in random_problem(),
            acts in proptest::collection::vec(0usize..3, 8),
            shrink in 0.0f64..100.0,
            alpha in 0.0f64..1.0,
        ) {
            let n = t.n_states();
            let p = EntropicParams::new(alpha, 0.3).unwrap();
            let policy = PlanPolicy {
                actions: acts[..n].iter().map(|&a| HighLevelAction::from_index(a).unwrap()).collect(),
                horizon: n,
            };
            let qpi = evaluate_policy(&policy, &t, &costs, p, 1e-12, 10_000).unwrap().q;
            // Shifting the fixed point down by a constant yields a subsolution.
            let sub = QTable::from_values(n, qpi.values().iter().map(|v| v - shrink).collect()).unwrap();
            let image = bellman_apply(&sub, &policy, &t, &costs, p).unwrap();
            for (a, b) in sub.values().iter().zip(image.values()) {
                prop_assert!(a <= &(b + 1e-9));
            }
            for (a, b) in sub.values().iter().zip(qpi.values()) {
                prop_assert!(a <= &(b + 1e-9));
            }
        }
    }
}

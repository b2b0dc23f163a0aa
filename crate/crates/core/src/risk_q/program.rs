use super::operators::{optimal_bellman, EntropicParams, QTable};
use super::sampling::SampleSet;
use super::RiskError;
use crate::mdp::{HighLevelAction, TransitionModel};

const NA: usize = HighLevelAction::COUNT;

/// Maximizer of the sampled program and its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramSolution {
    pub q: QTable,
    /// Tightest sampled immediate cost per pair, laid out `s * 3 + a`.
    pub costs: Vec<f64>,
    pub iterations: usize,
    /// Largest `Q(s,a) - rhs_i` over all sampled constraints.
    pub max_violation: f64,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
    /// `Σ c(s,a)·Q(s,a)`.
    pub objective: f64,
}

/// Solves `max Σ c·Q` subject to one constraint per sampled tuple,
/// `Q(s,a) <= ĉ_i + (1/α) log Σ_{s'} P̄(s'|s,a) exp(αγ min_{a'} Q(s',a'))`,
/// where `ĉ_i` is the tuple's mean inner cost.
///
/// For each pair only the smallest `ĉ_i` binds, so the feasible set is the
/// set of subsolutions of an optimal operator with those costs, and its
/// greatest element is that operator's fixed point. The solver iterates the
/// operator upward from the uniform lower bound `-ρ/(1-γ)`; the iterates
/// increase monotonically and stay feasible, and the final iterate is checked
/// against every sampled constraint.
pub fn solve_sampled_program(
    set: &SampleSet,
    transitions: &TransitionModel,
    objective_weights: Option<&[f64]>,
    p: EntropicParams,
    tol: f64,
    max_iters: usize,
) -> Result<ProgramSolution, RiskError> {
    p.validate()?;
    if p.gamma >= 1.0 {
        return Err(RiskError::BadParams(
            "the sampled program needs gamma < 1 for its lower bound".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(RiskError::BadParams(format!("tol must be positive, got {tol}")));
    }
    let n = transitions.n_states();
    if set.n_states != n {
        return Err(RiskError::ShapeMismatch);
    }
    let weights = match objective_weights {
        Some(w) if w.len() != n * NA => return Err(RiskError::ShapeMismatch),
        Some(w) if w.iter().any(|&c| !(c > 0.0)) => {
            return Err(RiskError::BadParams("objective weights must be positive".into()))
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; n * NA],
    };
    let uncovered = set.uncovered();
    if !uncovered.is_empty() {
        return Err(RiskError::InsufficientCoverage(uncovered));
    }

    let mut costs = vec![f64::INFINITY; n * NA];
    for t in &set.tuples {
        let c = t.mean_cost();
        if !c.is_finite() {
            return Err(RiskError::NonFinite(c));
        }
        let slot = &mut costs[t.s * NA + t.a];
        *slot = slot.min(c);
    }
    let rho = costs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut q = QTable::filled(n, -rho / (1.0 - p.gamma));

    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        let next = optimal_bellman(&q, transitions, &costs, p)?;
        residual = next.sup_distance(&q);
        q = next;
        iterations += 1;
        if residual <= tol {
            break;
        }
    }

    let image = optimal_bellman(&q, transitions, &costs, p)?;
    let mut max_violation = f64::NEG_INFINITY;
    for t in &set.tuples {
        let i = t.s * NA + t.a;
        let rhs = t.mean_cost() + (image.values()[i] - costs[i]);
        max_violation = max_violation.max(q.values()[i] - rhs);
    }
    if residual > tol || max_violation > tol {
        return Err(RiskError::BoundCertificateFailed {
            residual,
            max_violation,
        });
    }
    let objective = weights.iter().zip(q.values()).map(|(c, v)| c * v).sum();
    Ok(ProgramSolution {
        q,
        costs,
        iterations,
        max_violation,
        residual,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk_q::operators::{value_iterate, WeightFn};
    use crate::risk_q::sampling::{collect_samples, random_policies, SampleTuple, TableCosts};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exhaustive(t: &TransitionModel, costs: &[f64]) -> SampleSet {
        let n = t.n_states();
        let mut tuples = Vec::new();
        for s in 0..n {
            for a in 0..NA {
                for &(s2, _) in t.successors(s, a) {
                    tuples.push(SampleTuple {
                        s,
                        a,
                        s_next: s2,
                        a_next: 0,
                        costs: vec![costs[s * NA + a]],
                    });
                }
            }
        }
        SampleSet {
            n_states: n,
            inner: 1,
            tuples,
        }
    }

    #[test]
    fn self_loop() {
        let t = TransitionModel::from_rows(1, vec![vec![(0, 1.0)]; 3]).unwrap();
        let costs = [1.0; 3];
        let sol = solve_sampled_program(
            &exhaustive(&t, &costs),
            &t,
            None,
            EntropicParams::new(0.2, 0.3).unwrap(),
            1e-13,
            1000,
        )
        .unwrap();
        assert!((sol.q.get(0, 1) - 1.0 / 0.7).abs() < 1e-12);
        assert!(sol.max_violation <= 1e-13);
    }

    #[test]
    fn matches_value_iteration_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.random_range(2..20);
            let rows = (0..n * NA)
                .map(|_| {
                    let k = rng.random_range(1..4);
                    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
                    let total: f64 = w.iter().sum();
                    w.iter().map(|x| (rng.random_range(0..n), x / total)).collect()
                })
                .collect();
            let t = TransitionModel::from_rows(n, rows).unwrap();
            let costs: Vec<f64> = (0..n * NA).map(|_| rng.random_range(-20.0..20.0)).collect();
            let p = EntropicParams::new(0.2, 0.3).unwrap();
            let sol = solve_sampled_program(&exhaustive(&t, &costs), &t, None, p, 1e-12, 1000).unwrap();
            let fp = value_iterate(&QTable::filled(n, 0.0), &t, &costs, p, &WeightFn::uniform(n), 1e-12, 1000)
                .unwrap();
            assert!(sol.q.sup_distance(&fp.q) < 1e-8);
        }
    }

    /// With many inner samples the solution approaches the fixed point of
    /// the exact mean costs.
    #[test]
    fn converges_to_mean_cost_fixed_point() {
        let t = TransitionModel::from_rows(2, {
            let mut rows = vec![vec![(0, 0.5), (1, 0.5)]; 3];
            rows.extend(vec![vec![(1, 1.0)]; 3]);
            rows
        })
        .unwrap();
        struct Noisy;
        impl crate::risk_q::sampling::CostSampler for Noisy {
            fn sample_cost(&self, s: usize, _a: usize, rng: &mut dyn rand::RngCore) -> f64 {
                if s == 0 {
                    rng.random_range(0.0..2.0)
                } else {
                    0.0
                }
            }
        }
        let p = EntropicParams::new(0.2, 0.3).unwrap();
        let mean_costs = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let exact = value_iterate(&QTable::filled(2, 0.0), &t, &mean_costs, p, &WeightFn::uniform(2), 1e-13, 1000)
            .unwrap()
            .q;
        let mut gaps = Vec::new();
        for inner in [10, 1000, 100_000] {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let policies = random_policies(2, 1, 2, &mut rng);
            let set = collect_samples(&t, &Noisy, &policies, 60, inner, false, &mut rng).unwrap();
            if !set.uncovered().is_empty() {
                continue;
            }
            let sol = solve_sampled_program(&set, &t, None, p, 1e-12, 1000).unwrap();
            gaps.push(sol.q.sup_distance(&exact));
        }
        assert!(gaps.len() >= 2);
        assert!(gaps.last().unwrap() < &0.02, "{gaps:?}");
        assert!(gaps.first().unwrap() > gaps.last().unwrap());
    }

    #[test]
    fn reports_uncovered_pairs() {
        let t = TransitionModel::from_rows(2, vec![vec![(0, 1.0)]; 6]).unwrap();
        let costs = vec![0.0; 6];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let policies = random_policies(2, 1, 2, &mut rng);
        let mut set = collect_samples(&t, &TableCosts(&costs), &policies, 50, 1, false, &mut rng).unwrap();
        set.tuples.retain(|u| !(u.s == 1 && u.a == 2));
        let err = solve_sampled_program(&set, &t, None, EntropicParams::new(0.2, 0.3).unwrap(), 1e-9, 100);
        assert_eq!(err, Err(RiskError::InsufficientCoverage(vec![(1, 2)])));
    }

    #[test]
    fn certificate_fails_without_convergence() {
        let t = TransitionModel::from_rows(1, vec![vec![(0, 1.0)]; 3]).unwrap();
        let err = solve_sampled_program(
            &exhaustive(&t, &[1.0; 3]),
            &t,
            None,
            EntropicParams::new(0.2, 0.9).unwrap(),
            1e-12,
            3,
        );
        assert!(matches!(err, Err(RiskError::BoundCertificateFailed { .. })));
    }
}

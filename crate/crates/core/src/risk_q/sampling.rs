use std::collections::HashSet;

use rand::{Rng, RngCore};

use super::operators::PlanPolicy;
use super::RiskError;
use crate::mdp::{HighLevelAction, LocalMdp, TransitionModel};

const NA: usize = HighLevelAction::COUNT;

/// Source of sampled immediate costs for state-action pairs.
pub trait CostSampler {
    fn sample_cost(&self, s: usize, a: usize, rng: &mut dyn RngCore) -> f64;
}

impl CostSampler for LocalMdp {
    fn sample_cost(&self, s: usize, a: usize, rng: &mut dyn RngCore) -> f64 {
        self.rewards().sample_cost(s, a, self.transitions(), rng)
    }
}

/// Deterministic costs from a table laid out `s * 3 + a`.
#[derive(Debug, Clone, Copy)]
pub struct TableCosts<'a>(pub &'a [f64]);

impl CostSampler for TableCosts<'_> {
    fn sample_cost(&self, s: usize, a: usize, _rng: &mut dyn RngCore) -> f64 {
        self.0[s * NA + a]
    }
}

/// One generated state-action tuple with its inner cost realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTuple {
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    pub a_next: usize,
    pub costs: Vec<f64>,
}

impl SampleTuple {
    /// Empirical mean of the inner realizations.
    pub fn mean_cost(&self) -> f64 {
        self.costs.iter().sum::<f64>() / self.costs.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub n_states: usize,
    pub inner: usize,
    pub tuples: Vec<SampleTuple>,
}

impl SampleSet {
    /// Number of tuples per `(s, a)` pair, laid out `s * 3 + a`.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_states * NA];
        for t in &self.tuples {
            counts[t.s * NA + t.a] += 1;
        }
        counts
    }

    /// Pairs without any tuple.
    pub fn uncovered(&self) -> Vec<(usize, usize)> {
        self.counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| (i / NA, i % NA))
            .collect()
    }

    /// Removes tuples whose `(s, a, s', a')` already appeared, keeping the first.
    pub fn dedup(&mut self) {
        let mut seen = HashSet::new();
        self.tuples.retain(|t| seen.insert((t.s, t.a, t.s_next, t.a_next)));
    }
}

/// `count` policies choosing an action uniformly at random in every state.
pub fn random_policies<R: Rng + ?Sized>(
    n_states: usize,
    count: usize,
    horizon: usize,
    rng: &mut R,
) -> Vec<PlanPolicy> {
    (0..count)
        .map(|_| PlanPolicy {
            actions: (0..n_states)
                .map(|_| HighLevelAction::ALL[rng.random_range(0..NA)])
                .collect(),
            horizon,
        })
        .collect()
}

fn draw_tuple<R: RngCore>(
    s: usize,
    a: usize,
    policy: &PlanPolicy,
    transitions: &TransitionModel,
    sampler: &dyn CostSampler,
    inner: usize,
    rng: &mut R,
) -> SampleTuple {
    let s_next = transitions.sample_successor(s, a, rng.random::<f64>());
    let a_next = policy.action(s_next).index();
    let costs = (0..inner).map(|_| sampler.sample_cost(s, a, rng)).collect();
    SampleTuple {
        s,
        a,
        s_next,
        a_next,
        costs,
    }
}

/// Generates `n_per_policy` tuples per exploration policy from previewed
/// quantities only: `(s, a)` uniform, `s'` from the transition model, `a'`
/// from the policy, plus `inner` cost realizations per tuple.
pub fn collect_samples<R: RngCore>(
    transitions: &TransitionModel,
    sampler: &dyn CostSampler,
    policies: &[PlanPolicy],
    n_per_policy: usize,
    inner: usize,
    dedup: bool,
    rng: &mut R,
) -> Result<SampleSet, RiskError> {
    let n = transitions.n_states();
    if policies.is_empty() || n_per_policy == 0 || inner == 0 {
        return Err(RiskError::BadParams(
            "sampling needs at least one policy, one tuple per policy and one inner sample".into(),
        ));
    }
    if policies.iter().any(|p| p.actions.len() != n) {
        return Err(RiskError::ShapeMismatch);
    }
    let mut tuples = Vec::with_capacity(policies.len() * n_per_policy);
    for policy in policies {
        for _ in 0..n_per_policy {
            let s = rng.random_range(0..n);
            let a = rng.random_range(0..NA);
            tuples.push(draw_tuple(s, a, policy, transitions, sampler, inner, rng));
        }
    }
    let mut set = SampleSet {
        n_states: n,
        inner,
        tuples,
    };
    if dedup {
        set.dedup();
    }
    Ok(set)
}

/// Adds `per_pair` tuples for every uncovered pair. Returns how many pairs
/// were topped up.
pub fn top_up_coverage<R: RngCore>(
    set: &mut SampleSet,
    transitions: &TransitionModel,
    sampler: &dyn CostSampler,
    policy: &PlanPolicy,
    per_pair: usize,
    rng: &mut R,
) -> usize {
    let missing = set.uncovered();
    for &(s, a) in &missing {
        for _ in 0..per_pair {
            let t = draw_tuple(s, a, policy, transitions, sampler, set.inner, rng);
            set.tuples.push(t);
        }
    }
    missing.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_grid, make_transitions, next_cell, LaneLayout};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sizes_and_deterministic_successors() {
        let g = build_grid(5, 5, 2.0, 3.5, &LaneLayout::uniform(1, 3)).unwrap();
        let t = make_transitions(1.0, &g).unwrap();
        let costs = vec![0.5; g.cell_count() * NA];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let policies = random_policies(g.cell_count(), 10, 5, &mut rng);
        let set = collect_samples(&t, &TableCosts(&costs), &policies, 1000, 1, false, &mut rng).unwrap();
        assert_eq!(set.tuples.len(), 10_000);
        for tup in &set.tuples {
            let c = g.cell_at_index(tup.s);
            let a = HighLevelAction::from_index(tup.a).unwrap();
            assert_eq!(tup.s_next, g.index(next_cell(c, a, &g)));
            assert_eq!(tup.costs, vec![0.5]);
        }
        let mut deduped = set.clone();
        deduped.dedup();
        assert!(deduped.tuples.len() <= 25 * 3 * 3);
        assert!(deduped.uncovered().is_empty());
    }

    /// Chi-square test of successor frequencies for one pair against the
    /// transition table.
    #[test]
    fn successor_frequencies_match_transition_model() {
        let g = build_grid(5, 5, 2.0, 3.5, &LaneLayout::uniform(1, 3)).unwrap();
        let t = make_transitions(0.7, &g).unwrap();
        let costs = vec![0.0; g.cell_count() * NA];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let policies = random_policies(g.cell_count(), 1, 5, &mut rng);
        let set = collect_samples(&t, &TableCosts(&costs), &policies, 100_000, 1, false, &mut rng)
            .unwrap();
        let mut chi2 = 0.0;
        let mut dof = 0usize;
        for s in 0..g.cell_count() {
            for a in 0..NA {
                let here: Vec<_> = set.tuples.iter().filter(|u| u.s == s && u.a == a).collect();
                let total = here.len() as f64;
                for &(s2, p) in t.successors(s, a) {
                    let observed = here.iter().filter(|u| u.s_next == s2).count() as f64;
                    let expected = p * total;
                    chi2 += (observed - expected).powi(2) / expected;
                    dof += 1;
                }
                dof -= 1;
            }
        }
        // Mean dof, sd sqrt(2 dof); allow 4 standard deviations.
        let limit = dof as f64 + 4.0 * (2.0 * dof as f64).sqrt();
        assert!(chi2 < limit, "chi2 {chi2} dof {dof}");
    }

    #[test]
    fn top_up_fills_every_gap() {
        let g = build_grid(5, 5, 2.0, 3.5, &LaneLayout::uniform(1, 3)).unwrap();
        let t = make_transitions(0.9, &g).unwrap();
        let costs = vec![1.0; g.cell_count() * NA];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let policies = random_policies(g.cell_count(), 1, 5, &mut rng);
        let mut set = collect_samples(&t, &TableCosts(&costs), &policies, 20, 2, false, &mut rng).unwrap();
        let missing = set.uncovered().len();
        assert!(missing > 0);
        let added = top_up_coverage(&mut set, &t, &TableCosts(&costs), &policies[0], 1, &mut rng);
        assert_eq!(added, missing);
        assert!(set.uncovered().is_empty());
    }

    #[test]
    fn rejects_degenerate_requests() {
        let g = build_grid(3, 2, 1.0, 1.0, &LaneLayout::uniform(1, 1)).unwrap();
        let t = make_transitions(1.0, &g).unwrap();
        let costs = vec![0.0; 18];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let policies = random_policies(6, 1, 2, &mut rng);
        assert!(collect_samples(&t, &TableCosts(&costs), &[], 1, 1, false, &mut rng).is_err());
        assert!(collect_samples(&t, &TableCosts(&costs), &policies, 0, 1, false, &mut rng).is_err());
        assert!(collect_samples(&t, &TableCosts(&costs), &policies, 1, 0, false, &mut rng).is_err());
    }
}

//! Fixtures shared by the planning benchmarks.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskplan::mdp::{HighLevelAction, TransitionModel};
use riskplan::risk_q::{SampleSet, SampleTuple};
use riskplan::sim::{load_config, Scenario, ScenarioConfig};

/// The configuration shipped with the core crate.
pub fn bundled_config() -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios/highway_overtake.json");
    load_config(&path).expect("bundled config loads")
}

/// The bundled scenario, optionally shortened to `duration` seconds.
pub fn bundled_scenario(duration: Option<f64>) -> Scenario {
    let mut cfg = bundled_config();
    if let Some(d) = duration {
        cfg.duration = d;
    }
    Scenario::new(cfg).expect("bundled config is valid")
}

/// A random `n`-state problem with every successor sampled once.
pub fn random_program(n: usize, seed: u64) -> (TransitionModel, SampleSet) {
    let na = HighLevelAction::COUNT;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<(usize, f64)>> = (0..n * na)
        .map(|_| {
            let k = rng.random_range(1..=3);
            let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter().map(|x| (rng.random_range(0..n), x / total)).collect()
        })
        .collect();
    let mut tuples = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let cost = rng.random_range(-10.0..10.0);
        for &(s_next, _) in row {
            tuples.push(SampleTuple {
                s: i / na,
                a: i % na,
                s_next,
                a_next: 0,
                costs: vec![cost],
            });
        }
    }
    let t = TransitionModel::from_rows(n, rows).expect("rows are stochastic");
    (t, SampleSet { n_states: n, inner: 1, tuples })
}

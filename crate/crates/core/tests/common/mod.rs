#![allow(dead_code)]

use fairaudit::{ScenarioSpec, UtilitySpec};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const GRID: [f64; 10] = [0.0, 0.1, 0.2, 0.25, 0.3, 0.5, 0.6, 0.75, 0.9, 1.0];

/// A random discrete distribution on a coarse grid, so ties happen often.
pub fn random_dist<R: Rng>(rng: &mut R) -> UtilitySpec {
    match rng.random_range(0..3) {
        0 => UtilitySpec::point(*GRID.choose(rng).unwrap()).unwrap(),
        1 => {
            let a = *GRID.choose(rng).unwrap();
            let b = *GRID.choose(rng).unwrap();
            UtilitySpec::scaled_bernoulli(a.min(b), a.max(b), rng.random_range(0.05..0.95)).unwrap()
        }
        _ => {
            let n = rng.random_range(2..5);
            let weights: Vec<u32> = (0..n).map(|_| rng.random_range(1..5)).collect();
            let total: u32 = weights.iter().sum();
            UtilitySpec::table(
                weights
                    .iter()
                    .map(|&w| (*GRID.choose(rng).unwrap(), w as f64 / total as f64)),
            )
            .unwrap()
        }
    }
}

/// A random discrete scenario where at least one agent is always at or
/// above `c`.
pub fn random_scenario<R: Rng>(rng: &mut R, horizon: u64) -> ScenarioSpec {
    loop {
        let k = rng.random_range(2..=4);
        let c = *[0.1, 0.2, 0.25].choose(rng).unwrap();
        let dists = (0..k).map(|_| random_dist(rng)).collect();
        let s = ScenarioSpec::new(horizon, c, dists).unwrap();
        if s.has_always_eligible_agent() {
            return s;
        }
    }
}

/// Σ_t max_i u_{t,i} over a trace, taken over all agents.
pub fn welfare(trace: &fairaudit::Trace) -> f64 {
    trace
        .rounds
        .iter()
        .map(|r| r.utilities.iter().copied().fold(0.0, f64::max))
        .sum()
}

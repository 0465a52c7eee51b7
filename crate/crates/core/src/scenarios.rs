//! Built-in scenario library.
//!
//! Some entries take the agent count `k` and one depends on the horizon, so
//! entries are rules that build a [`ScenarioSpec`] once both are known.

use crate::distributions::{ScenarioSpec, UtilitySpec};
use crate::error::{Error, Result};

pub struct ScenarioLibraryEntry {
    pub name: &'static str,
    /// Agent count used when none is given.
    pub default_k: usize,
    /// Whether `k` may differ from `default_k`.
    pub variable_k: bool,
    pub provenance: &'static str,
    build: fn(usize, u64) -> Result<ScenarioSpec>,
}

impl ScenarioLibraryEntry {
    pub fn instantiate(&self, k: Option<usize>, horizon: u64) -> Result<ScenarioSpec> {
        let k = k.unwrap_or(self.default_k);
        if !self.variable_k && k != self.default_k {
            return Err(Error::validation(
                "scenario.k",
                format!("`{}` has exactly {} agents, got {k}", self.name, self.default_k),
            ));
        }
        if k < 2 {
            return Err(Error::validation(
                "scenario.k",
                format!("need at least 2 agents, got {k}"),
            ));
        }
        (self.build)(k, horizon)
    }
}

const THIRD: f64 = 1.0 / 3.0;
const TWO_THIRDS: f64 = 2.0 / 3.0;

/// Bernoulli parameter scale of `lb-regret-K`: agents 2..K draw 1 with
/// probability `REGRET_ALPHA / T`.
pub const REGRET_ALPHA: f64 = 1.0 / 8.0;

fn sec2_example(_k: usize, horizon: u64) -> Result<ScenarioSpec> {
    ScenarioSpec::new(
        horizon,
        THIRD,
        vec![UtilitySpec::point(THIRD)?, UtilitySpec::point(TWO_THIRDS)?],
    )
}

fn lb_audit(k: usize, horizon: u64) -> Result<ScenarioSpec> {
    let mut dists = vec![
        UtilitySpec::point(TWO_THIRDS)?,
        UtilitySpec::scaled_bernoulli(THIRD, 1.0, THIRD)?,
    ];
    dists.resize(k, UtilitySpec::point(0.25)?);
    ScenarioSpec::new(horizon, THIRD, dists)
}

fn lb_regret(k: usize, horizon: u64) -> Result<ScenarioSpec> {
    let rare = UtilitySpec::scaled_bernoulli(THIRD, 1.0, REGRET_ALPHA / horizon as f64)?;
    let mut dists = vec![UtilitySpec::point(TWO_THIRDS)?];
    dists.resize(k, rare);
    ScenarioSpec::new(horizon, THIRD, dists)
}

fn mixed_3(_k: usize, horizon: u64) -> Result<ScenarioSpec> {
    ScenarioSpec::new(
        horizon,
        0.2,
        vec![
            UtilitySpec::table([(0.1, 0.4), (0.7, 0.6)])?,
            UtilitySpec::table([(0.3, 0.5), (0.9, 0.5)])?,
            UtilitySpec::table([(0.05, 0.5), (0.5, 0.3), (1.0, 0.2)])?,
        ],
    )
}

static LIBRARY: [ScenarioLibraryEntry; 4] = [
    ScenarioLibraryEntry {
        name: "sec2-example",
        default_k: 2,
        variable_k: false,
        provenance: "Fixed utilities 1/3 and 2/3 with c = 1/3. The low agent never wins honestly, so lying once is its only gain.",
        build: sec2_example,
    },
    ScenarioLibraryEntry {
        name: "lb-audit-2",
        default_k: 2,
        variable_k: true,
        provenance: "Audit lower-bound construction: u1 = 2/3; u2 = 1 w.p. 1/3 else 1/3; u_i = 1/4 for i >= 3; c = 1/3.",
        build: lb_audit,
    },
    ScenarioLibraryEntry {
        name: "lb-regret-K",
        default_k: 2,
        variable_k: true,
        provenance: "Regret lower-bound construction: u1 = 2/3; u_i = 1 w.p. 1/(8T) else 1/3 for i >= 2; c = 1/3. Depends on T.",
        build: lb_regret,
    },
    ScenarioLibraryEntry {
        name: "mixed-3",
        default_k: 3,
        variable_k: false,
        provenance: "Three discrete agents with c = 0.2; agent 2 is always above c and the others straddle it.",
        build: mixed_3,
    },
];

pub fn library() -> &'static [ScenarioLibraryEntry] {
    &LIBRARY
}

pub fn lookup(name: &str) -> Result<&'static ScenarioLibraryEntry> {
    LIBRARY
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

/// Builds a library scenario for the given agent count and horizon.
pub fn instantiate(name: &str, k: Option<usize>, horizon: u64) -> Result<ScenarioSpec> {
    lookup(name)?.instantiate(k, horizon)
}

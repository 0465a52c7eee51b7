//! Bounded utility distributions, scenarios and fair shares.
//!
//! The fair winning probability of an alive agent `i` is the probability that
//! `i` wins the lexicographic comparison among alive agents under truthful
//! play while holding a utility of at least `c`. Its fair share is the
//! expected utility collected on that event.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent_set::{AgentSet, MAX_AGENTS};
use crate::error::{Error, Result};

/// Tolerance used when validating probabilities.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// A per-agent utility distribution supported on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UtilitySpecRepr", into = "UtilitySpecRepr")]
pub enum UtilitySpec {
    PointMass(f64),
    /// Atoms are sorted by strictly increasing value; probabilities sum to 1.
    DiscreteTable(Vec<(f64, f64)>),
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `hi` with probability `p`, otherwise `lo`.
    ScaledBernoulli {
        lo: f64,
        hi: f64,
        p: f64,
    },
}

fn check_unit(what: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidDistribution(format!("{what} = {v} is outside [0, 1]")));
    }
    Ok(())
}

impl UtilitySpec {
    pub fn point(value: f64) -> Result<Self> {
        check_unit("value", value)?;
        Ok(UtilitySpec::PointMass(value))
    }

    /// Builds a discrete table. Atoms with equal values are merged and the
    /// result is sorted by value.
    pub fn table(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("discrete table has no atoms".into()));
        }
        for &(v, p) in &atoms {
            check_unit("atom value", v)?;
            check_unit("atom probability", p)?;
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "atom probabilities sum to {total}, not 1"
            )));
        }
        Ok(UtilitySpec::DiscreteTable(merged))
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        check_unit("lo", lo)?;
        check_unit("hi", hi)?;
        if lo > hi {
            return Err(Error::InvalidDistribution(format!("uniform lo {lo} > hi {hi}")));
        }
        Ok(UtilitySpec::Uniform { lo, hi })
    }

    pub fn scaled_bernoulli(lo: f64, hi: f64, p: f64) -> Result<Self> {
        check_unit("lo", lo)?;
        check_unit("hi", hi)?;
        check_unit("p", p)?;
        if lo > hi {
            return Err(Error::InvalidDistribution(format!("bernoulli lo {lo} > hi {hi}")));
        }
        Ok(UtilitySpec::ScaledBernoulli { lo, hi, p })
    }

    /// Draws one utility. Every variant consumes exactly one `f64` from the
    /// stream, so streams stay aligned across distributions.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match *self {
            UtilitySpec::PointMass(v) => v,
            UtilitySpec::DiscreteTable(ref atoms) => {
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                // Rounding left the cumulative sum just under 1.
                atoms
                    .iter()
                    .rev()
                    .find(|a| a.1 > 0.0)
                    .map_or(atoms[atoms.len() - 1].0, |a| a.0)
            }
            UtilitySpec::Uniform { lo, hi } => lo + (hi - lo) * u,
            UtilitySpec::ScaledBernoulli { lo, hi, p } => {
                if u < p {
                    hi
                } else {
                    lo
                }
            }
        }
    }

    /// Finite support as `(value, probability)` pairs sorted by value, or
    /// `None` for continuous variants. Zero-probability atoms are dropped.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        let atoms = match *self {
            UtilitySpec::PointMass(v) => vec![(v, 1.0)],
            UtilitySpec::DiscreteTable(ref atoms) => atoms.clone(),
            UtilitySpec::Uniform { .. } => return None,
            UtilitySpec::ScaledBernoulli { lo, hi, p } => {
                if lo == hi {
                    vec![(lo, 1.0)]
                } else {
                    vec![(lo, 1.0 - p), (hi, p)]
                }
            }
        };
        Some(atoms.into_iter().filter(|a| a.1 > 0.0).collect())
    }

    /// `P(u <= v)` for finite-support variants.
    fn cdf_le(atoms: &[(f64, f64)], v: f64) -> f64 {
        atoms.iter().take_while(|a| a.0 <= v).map(|a| a.1).sum()
    }

    /// `P(u < v)` for finite-support variants.
    fn cdf_lt(atoms: &[(f64, f64)], v: f64) -> f64 {
        atoms.iter().take_while(|a| a.0 < v).map(|a| a.1).sum()
    }

    pub fn mean(&self) -> f64 {
        match *self {
            UtilitySpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            _ => self.atoms().expect("finite support").iter().map(|a| a.0 * a.1).sum(),
        }
    }

    /// Smallest point of the support.
    pub fn support_min(&self) -> f64 {
        match *self {
            UtilitySpec::Uniform { lo, .. } => lo,
            _ => self.atoms().expect("finite support")[0].0,
        }
    }

    /// Largest point of the support.
    pub fn support_max(&self) -> f64 {
        match *self {
            UtilitySpec::Uniform { hi, .. } => hi,
            _ => {
                let atoms = self.atoms().expect("finite support");
                atoms[atoms.len() - 1].0
            }
        }
    }

    /// Whether `v` is a possible draw.
    pub fn in_support(&self, v: f64) -> bool {
        match *self {
            UtilitySpec::Uniform { lo, hi } => (lo..=hi).contains(&v),
            _ => self.atoms().expect("finite support").iter().any(|a| a.0 == v),
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, UtilitySpec::Uniform { .. })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum UtilitySpecRepr {
    Point { value: f64 },
    Table { atoms: Vec<(f64, f64)> },
    Uniform { lo: f64, hi: f64 },
    Bernoulli { lo: f64, hi: f64, p: f64 },
}

impl TryFrom<UtilitySpecRepr> for UtilitySpec {
    type Error = Error;

    fn try_from(repr: UtilitySpecRepr) -> Result<Self> {
        match repr {
            UtilitySpecRepr::Point { value } => UtilitySpec::point(value),
            UtilitySpecRepr::Table { atoms } => UtilitySpec::table(atoms),
            UtilitySpecRepr::Uniform { lo, hi } => UtilitySpec::uniform(lo, hi),
            UtilitySpecRepr::Bernoulli { lo, hi, p } => UtilitySpec::scaled_bernoulli(lo, hi, p),
        }
    }
}

impl From<UtilitySpec> for UtilitySpecRepr {
    fn from(spec: UtilitySpec) -> Self {
        match spec {
            UtilitySpec::PointMass(value) => UtilitySpecRepr::Point { value },
            UtilitySpec::DiscreteTable(atoms) => UtilitySpecRepr::Table { atoms },
            UtilitySpec::Uniform { lo, hi } => UtilitySpecRepr::Uniform { lo, hi },
            UtilitySpec::ScaledBernoulli { lo, hi, p } => UtilitySpecRepr::Bernoulli { lo, hi, p },
        }
    }
}

/// Agent count, horizon, minimum winning utility and per-agent distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioRepr", into = "ScenarioRepr")]
pub struct ScenarioSpec {
    horizon: u64,
    c: f64,
    dists: Vec<UtilitySpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioRepr {
    horizon: u64,
    c: f64,
    agents: Vec<UtilitySpec>,
}

impl TryFrom<ScenarioRepr> for ScenarioSpec {
    type Error = Error;

    fn try_from(r: ScenarioRepr) -> Result<Self> {
        ScenarioSpec::new(r.horizon, r.c, r.agents)
    }
}

impl From<ScenarioSpec> for ScenarioRepr {
    fn from(s: ScenarioSpec) -> Self {
        ScenarioRepr {
            horizon: s.horizon,
            c: s.c,
            agents: s.dists,
        }
    }
}

impl ScenarioSpec {
    pub fn new(horizon: u64, c: f64, dists: Vec<UtilitySpec>) -> Result<Self> {
        if dists.len() < 2 || dists.len() > MAX_AGENTS {
            return Err(Error::InvalidScenario(format!(
                "agent count {} outside 2..={MAX_AGENTS}",
                dists.len()
            )));
        }
        if horizon == 0 {
            return Err(Error::InvalidScenario("horizon must be at least 1".into()));
        }
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidScenario(format!("c = {c} is outside (0, 1]")));
        }
        Ok(ScenarioSpec { horizon, c, dists })
    }

    pub fn k(&self) -> usize {
        self.dists.len()
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dists(&self) -> &[UtilitySpec] {
        &self.dists
    }

    pub fn dist(&self, agent: usize) -> &UtilitySpec {
        &self.dists[agent]
    }

    pub fn with_horizon(&self, horizon: u64) -> Result<Self> {
        ScenarioSpec::new(horizon, self.c, self.dists.clone())
    }

    pub fn all_agents(&self) -> AgentSet {
        AgentSet::full(self.k())
    }

    pub fn is_discrete(&self) -> bool {
        self.dists.iter().all(UtilitySpec::is_discrete)
    }

    /// Agents whose utility is at least `c` almost surely.
    pub fn always_above_c(&self) -> AgentSet {
        self.dists
            .iter()
            .enumerate()
            .filter(|(_, d)| d.support_min() >= self.c)
            .map(|(i, _)| i)
            .collect()
    }

    /// Whether some agent's utility is at least `c` almost surely.
    pub fn has_always_eligible_agent(&self) -> bool {
        !self.always_above_c().is_empty()
    }
}

/// Returns the winner of the lexicographic comparison on `(value, index)`:
/// highest value wins and equal values go to the higher index.
pub fn lex_winner(values: &[f64], contenders: AgentSet) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in contenders {
        match best {
            Some(b) if values[i] < values[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Whether `(a_value, a)` beats `(b_value, b)` lexicographically.
pub fn lex_beats(a_value: f64, a: usize, b_value: f64, b: usize) -> bool {
    a_value > b_value || (a_value == b_value && a > b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ShareMethod {
    Exact,
    MonteCarlo {
        n: u64,
        q_stderr: Vec<f64>,
        mu_stderr: Vec<f64>,
    },
}

/// Fair winning probabilities and fair shares for an alive set.
///
/// `q` and `mu` are indexed by agent over all `K` agents and are zero for
/// agents outside `alive`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairShares {
    pub alive: AgentSet,
    pub q: Vec<f64>,
    pub mu: Vec<f64>,
    pub method: ShareMethod,
}

/// Exact fair shares by enumeration over each alive agent's atoms.
///
/// For an atom `v >= c` of agent `i`, lower-index opponents must not exceed
/// `v` and higher-index opponents must stay strictly below it.
pub fn exact_fair_shares(scenario: &ScenarioSpec, alive: AgentSet) -> Result<FairShares> {
    let k = scenario.k();
    let mut atoms = vec![Vec::new(); k];
    for i in alive {
        atoms[i] = scenario
            .dist(i)
            .atoms()
            .ok_or(Error::ContinuousSupport { agent: i + 1 })?;
    }
    let c = scenario.c();
    let mut q = vec![0.0; k];
    let mut mu = vec![0.0; k];
    for i in alive {
        for &(v, p) in &atoms[i] {
            if v < c {
                continue;
            }
            let mut win = p;
            for j in alive.without(i) {
                win *= if j < i {
                    UtilitySpec::cdf_le(&atoms[j], v)
                } else {
                    UtilitySpec::cdf_lt(&atoms[j], v)
                };
            }
            q[i] += win;
            mu[i] += win * v;
        }
    }
    Ok(FairShares {
        alive,
        q,
        mu,
        method: ShareMethod::Exact,
    })
}

/// Monte-Carlo fair shares from `n` joint draws of the alive agents.
pub fn mc_fair_shares<R: Rng + ?Sized>(
    scenario: &ScenarioSpec,
    alive: AgentSet,
    n: u64,
    rng: &mut R,
) -> Result<FairShares> {
    if n == 0 {
        return Err(Error::validation("n", "Monte-Carlo sample count must be at least 1"));
    }
    let k = scenario.k();
    let c = scenario.c();
    let mut values = vec![0.0; k];
    let mut wins = vec![0u64; k];
    let mut gain = vec![0.0; k];
    let mut gain_sq = vec![0.0; k];
    for _ in 0..n {
        for i in alive {
            values[i] = scenario.dist(i).sample(rng);
        }
        if let Some(w) = lex_winner(&values, alive) {
            if values[w] >= c {
                wins[w] += 1;
                gain[w] += values[w];
                gain_sq[w] += values[w] * values[w];
            }
        }
    }
    let nf = n as f64;
    let q: Vec<f64> = wins.iter().map(|&w| w as f64 / nf).collect();
    let mu: Vec<f64> = gain.iter().map(|&g| g / nf).collect();
    let q_stderr = q.iter().map(|&p| (p * (1.0 - p) / nf).sqrt()).collect();
    let mu_stderr = mu
        .iter()
        .zip(&gain_sq)
        .map(|(&m, &s)| ((s / nf - m * m).max(0.0) / nf).sqrt())
        .collect();
    Ok(FairShares {
        alive,
        q,
        mu,
        method: ShareMethod::MonteCarlo { n, q_stderr, mu_stderr },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lower_bound_pair() -> ScenarioSpec {
        ScenarioSpec::new(
            100,
            1.0 / 3.0,
            vec![
                UtilitySpec::point(2.0 / 3.0).unwrap(),
                UtilitySpec::scaled_bernoulli(1.0 / 3.0, 1.0, 1.0 / 3.0).unwrap(),
            ],
        )
        .unwrap()
    }

    /// Brute-force oracle: enumerate the joint support and apply `lex_winner`.
    fn enumerate_shares(scenario: &ScenarioSpec, alive: AgentSet) -> (Vec<f64>, Vec<f64>) {
        let k = scenario.k();
        let members: Vec<usize> = alive.iter().collect();
        let atoms: Vec<Vec<(f64, f64)>> = (0..k).map(|i| scenario.dist(i).atoms().unwrap()).collect();
        let mut q = vec![0.0; k];
        let mut mu = vec![0.0; k];
        if members.is_empty() {
            return (q, mu);
        }
        let mut idx = vec![0usize; members.len()];
        let mut values = vec![0.0; k];
        loop {
            let mut prob = 1.0;
            for (slot, &i) in members.iter().enumerate() {
                let (v, p) = atoms[i][idx[slot]];
                values[i] = v;
                prob *= p;
            }
            let w = lex_winner(&values, alive).unwrap();
            if values[w] >= scenario.c() {
                q[w] += prob;
                mu[w] += prob * values[w];
            }
            let mut slot = 0;
            loop {
                if slot == members.len() {
                    return (q, mu);
                }
                idx[slot] += 1;
                if idx[slot] < atoms[members[slot]].len() {
                    break;
                }
                idx[slot] = 0;
                slot += 1;
            }
        }
    }

    #[test]
    fn point_mass_always_returns_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = UtilitySpec::point(2.0 / 3.0).unwrap();
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), 2.0 / 3.0);
        }
    }

    #[test]
    fn degenerate_bernoulli_returns_lo() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = UtilitySpec::scaled_bernoulli(1.0 / 3.0, 1.0, 0.0).unwrap();
        for _ in 0..1000 {
            assert_eq!(d.sample(&mut rng), 1.0 / 3.0);
        }
    }

    #[test]
    fn scaled_bernoulli_mean_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = UtilitySpec::scaled_bernoulli(1.0 / 3.0, 1.0, 1.0 / 3.0).unwrap();
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = d.sample(&mut rng);
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let stderr = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let expected = (2.0 / 3.0) * (1.0 / 3.0) + 1.0 / 3.0;
        assert_abs_diff_eq!(expected, 5.0 / 9.0, epsilon = 1e-15);
        assert!((mean - expected).abs() <= 3.0 * stderr, "{mean} vs {expected}");
    }

    #[test]
    fn table_merges_and_sorts_atoms() {
        let d = UtilitySpec::table([(0.5, 0.25), (0.1, 0.5), (0.5, 0.25)]).unwrap();
        assert_eq!(d, UtilitySpec::DiscreteTable(vec![(0.1, 0.5), (0.5, 0.5)]));
        assert!(UtilitySpec::table([(0.5, 0.6), (0.1, 0.5)]).is_err());
        assert!(UtilitySpec::table([(1.5, 1.0)]).is_err());
        assert!(UtilitySpec::scaled_bernoulli(0.9, 0.1, 0.5).is_err());
        assert!(UtilitySpec::uniform(0.9, 0.1).is_err());
    }

    #[test]
    fn lex_winner_examples() {
        let values = [0.5, 0.9];
        assert_eq!(lex_winner(&values, AgentSet::full(2)), Some(1));
        let values = [0.5, 0.5];
        assert_eq!(lex_winner(&values, AgentSet::full(2)), Some(1));
        let values = [0.0, 0.0, 0.2];
        assert_eq!(lex_winner(&values, AgentSet::from_indices([2])), Some(2));
        assert_eq!(lex_winner(&values, AgentSet::empty()), None);
    }

    #[test]
    fn exact_shares_on_lower_bound_pair() {
        let s = exact_fair_shares(&lower_bound_pair(), AgentSet::full(2)).unwrap();
        assert_abs_diff_eq!(s.q[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.q[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.mu[0], 4.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.mu[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_shares_lone_agent_and_ties() {
        let scenario = ScenarioSpec::new(
            10,
            1.0 / 3.0,
            vec![UtilitySpec::point(0.5).unwrap(), UtilitySpec::point(0.5).unwrap()],
        )
        .unwrap();
        let lone = exact_fair_shares(&scenario, AgentSet::from_indices([0])).unwrap();
        assert_eq!((lone.q[0], lone.mu[0]), (1.0, 0.5));
        assert_eq!((lone.q[1], lone.mu[1]), (0.0, 0.0));
        let both = exact_fair_shares(&scenario, AgentSet::full(2)).unwrap();
        assert_eq!(both.q, vec![0.0, 1.0]);
        assert_eq!(both.mu, vec![0.0, 0.5]);
    }

    #[test]
    fn exact_shares_reject_uniform() {
        let scenario = ScenarioSpec::new(
            10,
            0.2,
            vec![
                UtilitySpec::point(0.5).unwrap(),
                UtilitySpec::uniform(0.0, 1.0).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(
            exact_fair_shares(&scenario, AgentSet::full(2)),
            Err(Error::ContinuousSupport { agent: 2 })
        );
        // The uniform agent is not alive, so enumeration is fine.
        assert!(exact_fair_shares(&scenario, AgentSet::from_indices([0])).is_ok());
    }

    #[test]
    fn mc_shares_match_exact_on_lower_bound_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = mc_fair_shares(&lower_bound_pair(), AgentSet::full(2), 1_000_000, &mut rng).unwrap();
        let ShareMethod::MonteCarlo { ref q_stderr, .. } = s.method else {
            panic!("expected Monte-Carlo method");
        };
        assert!((s.q[0] - 2.0 / 3.0).abs() <= 3.0 * q_stderr[0]);
        assert!((s.q[1] - 1.0 / 3.0).abs() <= 3.0 * q_stderr[1]);
    }

    #[test]
    fn mc_single_draw_is_indicator() {
        let scenario = ScenarioSpec::new(
            10,
            0.1,
            vec![
                UtilitySpec::point(0.3).unwrap(),
                UtilitySpec::point(0.7).unwrap(),
                UtilitySpec::point(0.2).unwrap(),
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = mc_fair_shares(&scenario, scenario.all_agents(), 1, &mut rng).unwrap();
        assert_eq!(s.q, vec![0.0, 1.0, 0.0]);
        assert!(mc_fair_shares(&scenario, scenario.all_agents(), 0, &mut rng).is_err());
    }

    #[test]
    fn always_eligible_flag() {
        let ok = lower_bound_pair();
        assert!(ok.has_always_eligible_agent());
        let bad = ScenarioSpec::new(
            10,
            0.5,
            vec![
                UtilitySpec::table([(0.1, 0.5), (0.9, 0.5)]).unwrap(),
                UtilitySpec::uniform(0.2, 1.0).unwrap(),
            ],
        )
        .unwrap();
        assert!(!bad.has_always_eligible_agent());
    }

    #[test]
    fn scenario_serde_round_trip() {
        let s = lower_bound_pair();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"kind\":\"bernoulli\""));
        let back: ScenarioSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"horizon":10,"c":0.5,"agents":[{"kind":"point","value":2.0},{"kind":"point","value":0.5}]}"#;
        assert!(serde_json::from_str::<ScenarioSpec>(bad).is_err());
    }

    pub(crate) fn discrete_spec() -> impl Strategy<Value = UtilitySpec> {
        let grid = prop::sample::select(vec![0.0, 0.1, 0.2, 0.25, 0.3, 0.5, 0.6, 0.75, 0.9, 1.0]);
        prop_oneof![
            grid.clone().prop_map(|v| UtilitySpec::point(v).unwrap()),
            (grid.clone(), grid.clone(), 0.0f64..=1.0)
                .prop_map(|(a, b, p)| { UtilitySpec::scaled_bernoulli(a.min(b), a.max(b), p).unwrap() }),
            prop::collection::vec((grid, 1u32..5), 1..4).prop_map(|atoms| {
                let total: u32 = atoms.iter().map(|a| a.1).sum();
                UtilitySpec::table(atoms.into_iter().map(|(v, w)| (v, w as f64 / total as f64))).unwrap()
            }),
        ]
    }

    fn scenario_strategy() -> impl Strategy<Value = (ScenarioSpec, AgentSet)> {
        (
            prop::collection::vec(discrete_spec(), 2..5),
            prop::sample::select(vec![0.1, 0.2, 0.25, 0.5]),
            any::<u64>(),
        )
            .prop_map(|(dists, c, mask)| {
                let k = dists.len();
                let s = ScenarioSpec::new(50, c, dists).unwrap();
                let alive = AgentSet::full(k).iter().filter(|i| mask & (1 << i) != 0).collect();
                (s, alive)
            })
    }

    proptest! {
        #[test]
        fn exact_matches_joint_enumeration((scenario, alive) in scenario_strategy()) {
            let exact = exact_fair_shares(&scenario, alive).unwrap();
            let (q, mu) = enumerate_shares(&scenario, alive);
            for i in 0..scenario.k() {
                prop_assert!((exact.q[i] - q[i]).abs() < 1e-12);
                prop_assert!((exact.mu[i] - mu[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn share_invariants((scenario, alive) in scenario_strategy()) {
            let s = exact_fair_shares(&scenario, alive).unwrap();
            let c = scenario.c();
            let total: f64 = s.q.iter().sum();
            prop_assert!(total <= 1.0 + 1e-12);
            for i in 0..scenario.k() {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&s.q[i]));
                prop_assert!((0.0..=1.0 + 1e-12).contains(&s.mu[i]));
                prop_assert!(s.mu[i] >= c * s.q[i] - 1e-12);
                if !alive.contains(i) {
                    prop_assert_eq!(s.q[i], 0.0);
                }
            }
            let covered = scenario.always_above_c().iter().any(|i| alive.contains(i));
            if covered {
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn shrinking_alive_set_is_monotone((scenario, alive) in scenario_strategy()) {
            let big = exact_fair_shares(&scenario, alive).unwrap();
            for drop in alive {
                let small = exact_fair_shares(&scenario, alive.without(drop)).unwrap();
                for i in alive.without(drop) {
                    prop_assert!(small.q[i] >= big.q[i] - 1e-12);
                    prop_assert!(small.mu[i] >= big.mu[i] - 1e-12);
                }
            }
        }

        #[test]
        fn lex_winner_is_unique_argmax(values in prop::collection::vec(prop::sample::select(vec![0.0, 0.25, 0.5, 1.0]), 1..8)) {
            let set = AgentSet::full(values.len());
            let w = lex_winner(&values, set).unwrap();
            for j in set.without(w) {
                prop_assert!(lex_beats(values[w], w, values[j], j));
            }
        }

        #[test]
        fn samples_stay_in_support(spec in discrete_spec(), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let x = spec.sample(&mut rng);
                prop_assert!(spec.in_support(x));
            }
        }
    }
}

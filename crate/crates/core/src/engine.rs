//! Episode execution: draw utilities, collect reports, step the mechanism,
//! poll flags, record the round.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent_set::AgentSet;
use crate::agents::{AgentView, FlagStrategy, ReportStrategy};
use crate::distributions::{exact_fair_shares, mc_fair_shares, FairShares, ScenarioSpec};
use crate::error::{Error, Result};
use crate::mechanism::{
    AuditCoin, Mechanism, MechanismKind, MechanismState, Proposal, RecordedCoins, RngCoin, RoundOutcome,
};
use crate::rng;

/// Sample count for fair shares of scenarios with continuous distributions.
pub const MC_SHARE_SAMPLES: u64 = 100_000;

/// Everything needed to reproduce one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub scenario: ScenarioSpec,
    pub mechanism: MechanismKind,
    pub reports: Vec<ReportStrategy>,
    pub flags: Vec<FlagStrategy>,
    pub seed: u64,
}

impl EpisodeConfig {
    /// All agents truthful with well-behaved flags, seed 0.
    pub fn new(scenario: ScenarioSpec, mechanism: MechanismKind) -> Self {
        let k = scenario.k();
        EpisodeConfig {
            scenario,
            mechanism,
            reports: vec![ReportStrategy::Truthful; k],
            flags: vec![FlagStrategy::WellBehaved; k],
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Replaces the strategies of the 0-based `agent`.
    pub fn with_agent(mut self, agent: usize, report: ReportStrategy, flag: FlagStrategy) -> Self {
        self.reports[agent] = report;
        self.flags[agent] = flag;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.scenario.k();
        for (what, len) in [
            ("report strategies", self.reports.len()),
            ("flag strategies", self.flags.len()),
        ] {
            if len != k {
                return Err(Error::LengthMismatch {
                    what,
                    expected: k,
                    actual: len,
                });
            }
        }
        self.mechanism.validate()?;
        for (i, r) in self.reports.iter().enumerate() {
            r.validate(&format!("strategies[{}].report", i + 1))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// One played round: the drawn utilities, the reports and what the planner did.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    /// Alive set at the start of the round.
    pub alive: AgentSet,
    pub utilities: Vec<f64>,
    /// `None` for agents that were already eliminated.
    pub reports: Vec<Option<f64>>,
    pub outcome: RoundOutcome,
}

impl RoundRecord {
    pub fn round(&self) -> u64 {
        self.outcome.round
    }
}

/// Full record of an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    pub final_alive: AgentSet,
    /// First round of every epoch, starting with 1.
    pub epoch_boundaries: Vec<u64>,
}

/// End-of-episode facts that are not visible in individual rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeEnd {
    pub final_alive: AgentSet,
    pub epoch_boundaries: Vec<u64>,
}

/// Fair shares per alive set, computed on first use.
///
/// Discrete scenarios are enumerated exactly. Otherwise the shares are
/// estimated from [`MC_SHARE_SAMPLES`] draws seeded by the alive set, so
/// every agent and episode sees the same numbers.
pub struct ShareCache<'a> {
    scenario: &'a ScenarioSpec,
    shares: HashMap<AgentSet, FairShares>,
}

impl<'a> ShareCache<'a> {
    pub fn new(scenario: &'a ScenarioSpec) -> Self {
        ShareCache {
            scenario,
            shares: HashMap::new(),
        }
    }

    pub fn ensure(&mut self, alive: AgentSet) -> Result<()> {
        if !self.shares.contains_key(&alive) {
            let all_discrete = alive.iter().all(|i| self.scenario.dist(i).is_discrete());
            let shares = if all_discrete {
                exact_fair_shares(self.scenario, alive)?
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(alive.bits());
                mc_fair_shares(self.scenario, alive, MC_SHARE_SAMPLES, &mut rng)?
            };
            self.shares.insert(alive, shares);
        }
        Ok(())
    }

    /// Shares for an alive set previously passed to [`ShareCache::ensure`].
    pub fn peek(&self, alive: AgentSet) -> &FairShares {
        &self.shares[&alive]
    }

    pub fn get(&mut self, alive: AgentSet) -> Result<&FairShares> {
        self.ensure(alive)?;
        Ok(self.peek(alive))
    }
}

fn poll_flags(
    config: &EpisodeConfig,
    shares: &FairShares,
    utilities: &[f64],
    proposal: &Proposal,
    state: &MechanismState,
) -> Vec<bool> {
    (0..config.scenario.k())
        .map(|j| {
            // Eliminated agents have nothing at stake and never flag.
            if !state.alive.contains(j) {
                return false;
            }
            let view = AgentView {
                t: state.t,
                alive: state.alive,
                agent: j,
                utility: utilities[j],
                installed: &state.q_hat,
                scenario: &config.scenario,
                shares,
            };
            config.flags[j].flag(proposal, &view)
        })
        .collect()
}

fn step<C: AuditCoin + ?Sized>(
    mech: &mut Mechanism,
    config: &EpisodeConfig,
    shares: &FairShares,
    reports: &[Option<f64>],
    utilities: &[f64],
    mut flagger: impl FnMut(&Proposal, &MechanismState) -> Vec<bool>,
    coin: &mut C,
) -> Result<RoundOutcome> {
    match config.mechanism {
        MechanismKind::AdaAudit => mech.step_adaaudit(reports, utilities, &mut flagger, coin),
        MechanismKind::FixedProb { p } => mech.step_fixedprob(reports, utilities, coin, p),
        MechanismKind::Ideal => mech.step_ideal(reports, utilities, coin, &shares.mu),
        MechanismKind::Auxiliary => mech.step_auxiliary(reports, utilities, &shares.q),
    }
}

/// Runs one episode and hands every round to `observe` as it is played.
///
/// The record passed to `observe` is reused between rounds; clone it to keep
/// it.
pub fn run_episode_with<F: FnMut(&RoundRecord)>(config: &EpisodeConfig, mut observe: F) -> Result<EpisodeEnd> {
    config.validate()?;
    let scenario = &config.scenario;
    let k = scenario.k();
    let mut mech = Mechanism::new(config.mechanism.clone(), scenario)?;
    let mut cache = ShareCache::new(scenario);
    let mut utility_streams: Vec<ChaCha8Rng> = (0..k).map(|i| rng::utility_stream(config.seed, i)).collect();
    let mut coin = RngCoin(rng::mechanism_stream(config.seed));
    let mut record = RoundRecord {
        alive: AgentSet::full(k),
        utilities: vec![0.0; k],
        reports: vec![None; k],
        outcome: RoundOutcome::default(),
    };
    let mut epoch_boundaries = vec![1];

    while !mech.is_finished() {
        let t = mech.state().t;
        let alive = mech.state().alive;
        record.alive = alive;
        for (i, stream) in utility_streams.iter_mut().enumerate() {
            record.utilities[i] = scenario.dist(i).sample(stream);
        }
        cache.ensure(alive)?;
        let shares = cache.peek(alive);
        for i in 0..k {
            record.reports[i] = alive.contains(i).then(|| {
                let view = AgentView {
                    t,
                    alive,
                    agent: i,
                    utility: record.utilities[i],
                    installed: &mech.state().q_hat,
                    scenario,
                    shares,
                };
                config.reports[i].report(&view)
            });
        }
        let utilities = &record.utilities;
        record.outcome = step(
            &mut mech,
            config,
            shares,
            &record.reports,
            utilities,
            |p, st| poll_flags(config, shares, utilities, p, st),
            &mut coin,
        )?;
        if record.outcome.eliminated.is_some() && config.mechanism == MechanismKind::AdaAudit {
            let start = mech.state().epoch_start;
            if start <= scenario.horizon() {
                epoch_boundaries.push(start);
            }
        }
        observe(&record);
    }
    Ok(EpisodeEnd {
        final_alive: mech.state().alive,
        epoch_boundaries,
    })
}

/// Runs one episode and keeps the full trace.
pub fn run_episode(config: &EpisodeConfig) -> Result<Trace> {
    let mut rounds = Vec::with_capacity(config.scenario.horizon() as usize);
    let end = run_episode_with(config, |r| rounds.push(r.clone()))?;
    Ok(Trace {
        seed: config.seed,
        rounds,
        final_alive: end.final_alive,
        epoch_boundaries: end.epoch_boundaries,
    })
}

/// Maps `f` over the seeds of `n` replications, in parallel, returning
/// results in replication order.
pub fn replicate<R, F>(n: u64, base_seed: u64, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(u64) -> Result<R> + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|r| f(rng::replication_seed(base_seed, r)))
        .collect()
}

/// Runs `n` seeded replications of `config` and keeps every trace.
pub fn run_replications(config: &EpisodeConfig, n: u64, base_seed: u64) -> Result<Vec<Trace>> {
    replicate(n, base_seed, |seed| run_episode(&config.clone().with_seed(seed)))
}

/// Re-runs the mechanism on a trace's recorded reports, utilities, audit
/// decisions and flags, and checks every outcome matches the record.
pub fn replay(config: &EpisodeConfig, trace: &Trace) -> Result<()> {
    let mut mech = Mechanism::new(config.mechanism.clone(), &config.scenario)?;
    let mut cache = ShareCache::new(&config.scenario);
    let mut coins = RecordedCoins(
        trace
            .rounds
            .iter()
            .filter(|r| r.outcome.winner.is_some())
            .map(|r| r.outcome.audited),
    );
    for record in &trace.rounds {
        let alive = mech.state().alive;
        if alive != record.alive {
            return Err(Error::ReplayMismatch {
                round: record.round(),
                what: format!("alive set {alive} != recorded {}", record.alive),
            });
        }
        let shares = cache.get(alive)?;
        let recorded_flags = record.outcome.flags.clone();
        let outcome = step(
            &mut mech,
            config,
            shares,
            &record.reports,
            &record.utilities,
            |_, _| recorded_flags.clone(),
            &mut coins,
        )?;
        if outcome != record.outcome {
            return Err(Error::ReplayMismatch {
                round: record.round(),
                what: format!("{outcome:?} != recorded {:?}", record.outcome),
            });
        }
    }
    Ok(())
}

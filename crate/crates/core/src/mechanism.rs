//! The planner's allocation rules.
//!
//! Four rules share one state machine: the adaptive audit rule with online
//! win-rate estimates and flagging, auditing with a fixed probability, the
//! ideal rule that knows every fair share, and the auxiliary game in which a
//! winning mark-up is always caught.
//!
//! All rules allocate to the lexicographic winner of the alive reports. They
//! differ in whether and how the winner is audited and in the predicate that
//! triggers elimination:
//!
//! | rule        | allocates when      | audit probability                         | eliminated if          |
//! |-------------|---------------------|-------------------------------------------|------------------------|
//! | `adaaudit`  | top report `>= c`   | `min(8K²/((T-t)·q̂·c), 1)`, `1` if `q̂ = 0` | audited, `u < v`       |
//! | `fixed`     | always              | `p`                                       | audited, `u != v`      |
//! | `ideal`     | always              | `min(1/((T-t)·µ), 1)`                     | audited, `u < v`       |
//! | `auxiliary` | always              | none                                      | `v > u`                |

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent_set::AgentSet;
use crate::distributions::{lex_beats, ScenarioSpec};
use crate::error::{Error, Result};

/// Which allocation rule to run. Fair shares needed by `Ideal` and
/// `Auxiliary` are supplied per round by the caller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MechanismKind {
    AdaAudit,
    #[serde(rename = "fixed")]
    FixedProb {
        p: f64,
    },
    Ideal,
    Auxiliary,
}

impl MechanismKind {
    pub fn validate(&self) -> Result<()> {
        if let MechanismKind::FixedProb { p } = *self {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::validation("mechanism.p", format!("{p} is outside (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            MechanismKind::AdaAudit => "adaaudit",
            MechanismKind::FixedProb { .. } => "fixed",
            MechanismKind::Ideal => "ideal",
            MechanismKind::Auxiliary => "auxiliary",
        }
    }
}

/// Planner state between rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismState {
    /// The next round to be played, 1-based.
    pub t: u64,
    pub alive: AgentSet,
    pub epoch: u32,
    /// First round of the current epoch.
    pub epoch_start: u64,
    /// Installed win-rate estimates; `0` marks the estimation phase.
    pub q_hat: Vec<f64>,
    /// Wins per agent since `epoch_start`.
    pub epoch_wins: Vec<u64>,
}

/// A freshly computed win-rate estimate put to the agents for flagging.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub agent: usize,
    pub estimate: f64,
}

/// What happened in one round.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoundOutcome {
    pub round: u64,
    pub winner: Option<usize>,
    /// Probability the audit coin was flipped with; `0` when nobody was
    /// allocated or the rule never audits.
    pub audit_probability: f64,
    pub audited: bool,
    /// The winner's utility if audited, else `0`.
    pub observed_utility: f64,
    pub eliminated: Option<usize>,
    pub proposal: Option<Proposal>,
    /// Flag answers, one per agent; empty when there was no proposal.
    pub flags: Vec<bool>,
    /// Whether the proposal survived flagging and was installed.
    pub installed: bool,
}

/// Source of audit decisions.
pub trait AuditCoin {
    /// Returns whether to audit, given the audit probability.
    fn flip(&mut self, p: f64) -> bool;
}

/// Audit coin drawing one uniform per flip.
pub struct RngCoin<R>(pub R);

impl<R: Rng> AuditCoin for RngCoin<R> {
    fn flip(&mut self, p: f64) -> bool {
        let u: f64 = self.0.random();
        u < p
    }
}

/// Replays previously recorded audit decisions in order.
pub struct RecordedCoins<I>(pub I);

impl<I: Iterator<Item = bool>> AuditCoin for RecordedCoins<I> {
    fn flip(&mut self, _p: f64) -> bool {
        self.0.next().unwrap_or(false)
    }
}

/// Audit probability of the adaptive rule for a winner with estimate `q_hat`.
pub fn adaaudit_audit_probability(k: usize, horizon: u64, t: u64, q_hat: f64, c: f64) -> f64 {
    if q_hat == 0.0 || t >= horizon {
        return 1.0;
    }
    let kf = k as f64;
    (8.0 * kf * kf / ((horizon - t) as f64 * q_hat * c)).min(1.0)
}

/// Audit probability of the ideal rule for a winner with fair share `mu`.
pub fn ideal_audit_probability(horizon: u64, t: u64, mu: f64) -> f64 {
    if mu == 0.0 || t >= horizon {
        return 1.0;
    }
    (1.0 / ((horizon - t) as f64 * mu)).min(1.0)
}

/// Threshold `2K²/((T-t)·q·c)` of the auxiliary game. Mark-ups are allowed
/// only while it exceeds 1; a zero denominator gives `+∞`.
pub fn auxiliary_threshold(k: usize, horizon: u64, t: u64, q: f64, c: f64) -> f64 {
    let denom = horizon.saturating_sub(t) as f64 * q * c;
    if denom == 0.0 {
        return f64::INFINITY;
    }
    let kf = k as f64;
    2.0 * kf * kf / denom
}

/// The planner: rule parameters plus mutable state.
#[derive(Clone, Debug)]
pub struct Mechanism {
    kind: MechanismKind,
    k: usize,
    horizon: u64,
    c: f64,
    state: MechanismState,
}

impl Mechanism {
    pub fn new(kind: MechanismKind, scenario: &ScenarioSpec) -> Result<Self> {
        kind.validate()?;
        let k = scenario.k();
        Ok(Mechanism {
            kind,
            k,
            horizon: scenario.horizon(),
            c: scenario.c(),
            state: MechanismState {
                t: 1,
                alive: AgentSet::full(k),
                epoch: 1,
                epoch_start: 1,
                q_hat: vec![0.0; k],
                epoch_wins: vec![0; k],
            },
        })
    }

    pub fn kind(&self) -> &MechanismKind {
        &self.kind
    }

    pub fn state(&self) -> &MechanismState {
        &self.state
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn is_finished(&self) -> bool {
        self.state.t > self.horizon
    }

    /// Adaptive audit probability for `winner` in the current round.
    pub fn audit_probability(&self, winner: usize) -> f64 {
        adaaudit_audit_probability(self.k, self.horizon, self.state.t, self.state.q_hat[winner], self.c)
    }

    /// Checks the round is within the horizon and that reports cover exactly
    /// the alive set with values in `[0, 1]`.
    fn check_round(&self, reports: &[Option<f64>], utilities: &[f64]) -> Result<()> {
        if self.is_finished() {
            return Err(Error::HorizonExceeded {
                round: self.state.t,
                horizon: self.horizon,
            });
        }
        for (what, len) in [("reports", reports.len()), ("utilities", utilities.len())] {
            if len != self.k {
                return Err(Error::LengthMismatch {
                    what,
                    expected: self.k,
                    actual: len,
                });
            }
        }
        for (i, r) in reports.iter().enumerate() {
            match (*r, self.state.alive.contains(i)) {
                (Some(_), false) => return Err(Error::ReportFromEliminatedAgent { agent: i + 1 }),
                (None, true) => return Err(Error::MissingReport { agent: i + 1 }),
                (Some(v), true) if !(0.0..=1.0).contains(&v) => {
                    return Err(Error::ReportOutOfRange { agent: i + 1, value: v })
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Lexicographic winner among alive reports, with its report.
    fn top_report(&self, reports: &[Option<f64>]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for i in self.state.alive {
            let v = reports[i].expect("checked");
            match best {
                Some((b, bv)) if !lex_beats(v, i, bv, b) => {}
                _ => best = Some((i, v)),
            }
        }
        best
    }

    fn eliminate(&mut self, agent: usize, t: u64) {
        self.state.alive.remove(agent);
        if self.kind == MechanismKind::AdaAudit {
            self.state.epoch += 1;
            self.state.epoch_start = t + 1;
            self.state.q_hat.fill(0.0);
            self.state.epoch_wins.fill(0);
        }
    }

    fn finish(&mut self, out: RoundOutcome) -> RoundOutcome {
        self.state.t += 1;
        out
    }

    /// One round of the adaptive audit rule.
    ///
    /// `flagger` is asked for one flag per agent whenever a new estimate is
    /// proposed; it sees the state before the estimate is installed.
    pub fn step_adaaudit<C, F>(
        &mut self,
        reports: &[Option<f64>],
        utilities: &[f64],
        mut flagger: F,
        coin: &mut C,
    ) -> Result<RoundOutcome>
    where
        C: AuditCoin + ?Sized,
        F: FnMut(&Proposal, &MechanismState) -> Vec<bool>,
    {
        self.check_round(reports, utilities)?;
        let t = self.state.t;
        let mut out = RoundOutcome {
            round: t,
            ..Default::default()
        };
        let Some((w, report)) = self.top_report(reports).filter(|&(_, v)| v >= self.c) else {
            return Ok(self.finish(out));
        };
        out.winner = Some(w);
        out.audit_probability = self.audit_probability(w);
        out.audited = coin.flip(out.audit_probability);
        if out.audited {
            out.observed_utility = utilities[w];
        }
        if out.audited && utilities[w] < report {
            out.eliminated = Some(w);
            self.eliminate(w, t);
            return Ok(self.finish(out));
        }
        self.state.epoch_wins[w] += 1;
        if self.state.q_hat[w] == 0.0 {
            let window = t - self.state.epoch_start + 1;
            let proposal = Proposal {
                agent: w,
                estimate: self.state.epoch_wins[w] as f64 / window as f64,
            };
            let flags = flagger(&proposal, &self.state);
            if flags.len() != self.k {
                return Err(Error::LengthMismatch {
                    what: "flags",
                    expected: self.k,
                    actual: flags.len(),
                });
            }
            if !flags.iter().any(|&f| f) {
                self.state.q_hat[w] = proposal.estimate;
                out.installed = true;
            }
            out.proposal = Some(proposal);
            out.flags = flags;
        }
        Ok(self.finish(out))
    }

    /// One round of auditing with fixed probability `p`.
    pub fn step_fixedprob<C: AuditCoin + ?Sized>(
        &mut self,
        reports: &[Option<f64>],
        utilities: &[f64],
        coin: &mut C,
        p: f64,
    ) -> Result<RoundOutcome> {
        self.check_round(reports, utilities)?;
        let t = self.state.t;
        let mut out = RoundOutcome {
            round: t,
            ..Default::default()
        };
        let Some((w, report)) = self.top_report(reports) else {
            return Ok(self.finish(out));
        };
        out.winner = Some(w);
        out.audit_probability = p;
        out.audited = coin.flip(p);
        if out.audited {
            out.observed_utility = utilities[w];
            if utilities[w] != report {
                out.eliminated = Some(w);
                self.eliminate(w, t);
            }
        }
        Ok(self.finish(out))
    }

    /// One round of the ideal rule; `mu` holds fair shares of the current
    /// alive set, indexed by agent.
    pub fn step_ideal<C: AuditCoin + ?Sized>(
        &mut self,
        reports: &[Option<f64>],
        utilities: &[f64],
        coin: &mut C,
        mu: &[f64],
    ) -> Result<RoundOutcome> {
        self.check_round(reports, utilities)?;
        let t = self.state.t;
        let mut out = RoundOutcome {
            round: t,
            ..Default::default()
        };
        let Some((w, report)) = self.top_report(reports) else {
            return Ok(self.finish(out));
        };
        out.winner = Some(w);
        out.audit_probability = ideal_audit_probability(self.horizon, t, mu[w]);
        out.audited = coin.flip(out.audit_probability);
        if out.audited {
            out.observed_utility = utilities[w];
            if utilities[w] < report {
                out.eliminated = Some(w);
                self.eliminate(w, t);
            }
        }
        Ok(self.finish(out))
    }

    /// One round of the auxiliary game; `q` holds fair winning probabilities
    /// of the current alive set, indexed by agent.
    pub fn step_auxiliary(&mut self, reports: &[Option<f64>], utilities: &[f64], q: &[f64]) -> Result<RoundOutcome> {
        self.check_round(reports, utilities)?;
        let t = self.state.t;
        for i in self.state.alive {
            let v = reports[i].expect("checked");
            let threshold = auxiliary_threshold(self.k, self.horizon, t, q[i], self.c);
            if threshold <= 1.0 && v > utilities[i] {
                return Err(Error::RestrictedMarkUp {
                    agent: i + 1,
                    round: t,
                    threshold,
                });
            }
        }
        let mut out = RoundOutcome {
            round: t,
            ..Default::default()
        };
        let Some((w, report)) = self.top_report(reports) else {
            return Ok(self.finish(out));
        };
        out.winner = Some(w);
        if report > utilities[w] {
            out.eliminated = Some(w);
            self.eliminate(w, t);
        }
        Ok(self.finish(out))
    }
}

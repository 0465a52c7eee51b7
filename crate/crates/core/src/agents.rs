//! Report and flag strategies.
//!
//! Strategies are stateless. They see an [`AgentView`]: the round, the alive
//! set, the agent's own utility, the publicly installed estimates and the
//! scenario, which is common knowledge among agents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agent_set::AgentSet;
use crate::distributions::{FairShares, ScenarioSpec};
use crate::error::{Error, Result};
use crate::mechanism::{auxiliary_threshold, Proposal};

/// What an agent can observe when asked to act.
#[derive(Clone, Copy, Debug)]
pub struct AgentView<'a> {
    pub t: u64,
    pub alive: AgentSet,
    /// 0-based index of the observing agent.
    pub agent: usize,
    pub utility: f64,
    pub installed: &'a [f64],
    pub scenario: &'a ScenarioSpec,
    /// Fair shares for `alive`, computed from the public scenario.
    pub shares: &'a FairShares,
}

impl AgentView<'_> {
    /// The observer's auxiliary-game threshold `2K²/((T-t)·q·c)`.
    pub fn own_threshold(&self) -> f64 {
        auxiliary_threshold(
            self.scenario.k(),
            self.scenario.horizon(),
            self.t,
            self.shares.q[self.agent],
            self.scenario.c(),
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReportStrategy {
    #[default]
    Truthful,
    /// Always report the given value.
    MarkUpAlways(f64),
    /// Report 1 while the agent's auxiliary threshold exceeds 1, else the
    /// truth. This is the agent with nothing left to lose.
    MarkUpWhenUnwatched,
    /// Report `factor · u`.
    MarkDown(f64),
    /// Fixed reports for the listed rounds, truthful elsewhere.
    Scripted(BTreeMap<u64, f64>),
}

impl ReportStrategy {
    pub fn validate(&self, field: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::validation(field, msg));
        match self {
            ReportStrategy::MarkUpAlways(v) if !(0.0..=1.0).contains(v) => {
                bad(format!("mark-up value {v} outside [0, 1]"))
            }
            ReportStrategy::MarkDown(f) if !(0.0..1.0).contains(f) => {
                bad(format!("mark-down factor {f} outside [0, 1)"))
            }
            ReportStrategy::Scripted(map) => match map.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                Some((t, v)) => bad(format!("scripted report {v} for round {t} outside [0, 1]")),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    pub fn report(&self, view: &AgentView<'_>) -> f64 {
        let u = view.utility;
        match self {
            ReportStrategy::Truthful => u,
            ReportStrategy::MarkUpAlways(v) => *v,
            ReportStrategy::MarkUpWhenUnwatched => {
                if view.own_threshold() > 1.0 {
                    1.0
                } else {
                    u
                }
            }
            ReportStrategy::MarkDown(factor) => factor * u,
            ReportStrategy::Scripted(map) => map.get(&view.t).copied().unwrap_or(u),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlagStrategy {
    /// Flag when the estimate exceeds four times the true rate, or when it
    /// is the observer's own estimate and falls below a quarter of it.
    #[default]
    WellBehaved,
    Never,
    Always,
    /// Only the first clause of `WellBehaved`: flag over-estimates.
    SelfishUpOnly,
}

impl FlagStrategy {
    /// Answer to a proposed estimate. `view.shares` must describe the alive
    /// set after the round.
    pub fn flag(&self, proposal: &Proposal, view: &AgentView<'_>) -> bool {
        let q = view.shares.q[proposal.agent];
        let over = proposal.estimate > 4.0 * q;
        match self {
            FlagStrategy::WellBehaved => over || (view.agent == proposal.agent && proposal.estimate < q / 4.0),
            FlagStrategy::Never => false,
            FlagStrategy::Always => true,
            FlagStrategy::SelfishUpOnly => over,
        }
    }
}

//! Repeated allocation of a single resource without money, kept honest by
//! post-allocation audits.
//!
//! Each round every alive agent privately draws a utility, reports a value,
//! and the planner gives the resource to the highest report. The planner may
//! then audit the winner, learning their true utility, and permanently
//! eliminate agents caught overstating. This crate simulates four planner
//! rules ([`mechanism`]), a menu of agent strategies ([`agents`]), and the
//! measurements used to check them: welfare regret, audit counts, missed
//! fair wins, paired deviation gains and the coupling between the adaptive
//! rule and its auxiliary game ([`analysis`]).
//!
//! ```
//! use fairaudit::{analysis, scenarios, EpisodeConfig, MechanismKind};
//!
//! let scenario = scenarios::instantiate("mixed-3", None, 2_000)?;
//! let config = EpisodeConfig::new(scenario, MechanismKind::AdaAudit).with_seed(1);
//! let row = analysis::episode_metrics(&config)?;
//! assert_eq!(row.regret, 0.0);
//! assert!(row.audits < 2_000);
//! # Ok::<(), fairaudit::Error>(())
//! ```

pub mod agent_set;
pub mod agents;
pub mod analysis;
pub mod config;
pub mod distributions;
pub mod engine;
pub mod error;
pub mod mechanism;
pub mod output;
pub mod rng;
pub mod scenarios;

pub use agent_set::AgentSet;
pub use agents::{AgentView, FlagStrategy, ReportStrategy};
pub use analysis::{DeviationReport, MetricsRow};
pub use distributions::{exact_fair_shares, lex_winner, mc_fair_shares, FairShares, ScenarioSpec, UtilitySpec};
pub use engine::{run_episode, run_replications, EpisodeConfig, RoundRecord, Trace};
pub use error::{Error, Result};
pub use mechanism::{Mechanism, MechanismKind, MechanismState, RoundOutcome};

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fair-shares.md")]
    mod fair_shares {}
    #[doc = include_str!("../../../book/src/mechanisms.md")]
    mod mechanisms {}
    #[doc = include_str!("../../../book/src/agents.md")]
    mod agents {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

//! Experiment configuration files (TOML).
//!
//! ```toml
//! n = 100
//! horizon = 20000
//! base_seed = 7
//! t_grid = [2000, 20000, 200000]
//! out = "results/mixed"
//!
//! scenario = { name = "lb-audit-2", k = 4 }
//! # or: scenario = "sec2-example"
//! # or: scenario = { c = 0.2, agents = [{ kind = "point", value = 0.6 }, ...] }
//!
//! [mechanism]
//! kind = "fixed"
//! p = 0.1
//!
//! [[strategies]]
//! agent = 2
//! report = { mark-down = 0.5 }
//! flag = "never"
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{FlagStrategy, ReportStrategy};
use crate::distributions::{ScenarioSpec, UtilitySpec};
use crate::engine::EpisodeConfig;
use crate::error::{Error, Result};
use crate::mechanism::MechanismKind;
use crate::scenarios;

pub const DEFAULT_HORIZON: u64 = 1000;

/// Where the scenario comes from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Library { name: String, k: Option<usize> },
    Inline { c: f64, agents: Vec<UtilitySpec> },
}

impl ScenarioRef {
    /// Builds the scenario for a horizon.
    pub fn at(&self, horizon: u64) -> Result<ScenarioSpec> {
        match self {
            ScenarioRef::Library { name, k } => scenarios::instantiate(name, *k, horizon),
            ScenarioRef::Inline { c, agents } => ScenarioSpec::new(horizon, *c, agents.clone()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioTable {
    name: Option<String>,
    k: Option<usize>,
    c: Option<f64>,
    agents: Option<Vec<UtilitySpec>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStrategy {
    agent: usize,
    report: Option<ReportStrategy>,
    flag: Option<FlagStrategy>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: toml::Value,
    horizon: Option<u64>,
    mechanism: MechanismKind,
    #[serde(default)]
    strategies: Vec<RawStrategy>,
    n: u64,
    base_seed: Option<u64>,
    t_grid: Option<Vec<u64>>,
    out: Option<PathBuf>,
    #[serde(default)]
    emit_traces: bool,
}

/// A validated experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioRef,
    pub horizon: u64,
    pub mechanism: MechanismKind,
    pub reports: Vec<ReportStrategy>,
    pub flags: Vec<FlagStrategy>,
    pub n: u64,
    pub base_seed: u64,
    pub t_grid: Option<Vec<u64>>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub emit_traces: bool,
}

fn parse_scenario(value: toml::Value) -> Result<ScenarioRef> {
    match value {
        toml::Value::String(name) => Ok(ScenarioRef::Library { name, k: None }),
        toml::Value::Table(table) => {
            let t: ScenarioTable = table
                .try_into()
                .map_err(|e: toml::de::Error| Error::Parse(format!("scenario: {}", e.message())))?;
            match (t.name, t.c, t.agents) {
                (Some(name), None, None) => Ok(ScenarioRef::Library { name, k: t.k }),
                (None, Some(c), Some(agents)) => {
                    if t.k.is_some_and(|k| k != agents.len()) {
                        return Err(Error::validation(
                            "scenario.k",
                            format!("k = {} but {} agents listed", t.k.unwrap(), agents.len()),
                        ));
                    }
                    Ok(ScenarioRef::Inline { c, agents })
                }
                _ => Err(Error::validation(
                    "scenario",
                    "give either `name` (library) or both `c` and `agents` (inline)",
                )),
            }
        }
        other => Err(Error::validation(
            "scenario",
            format!("expected a name or a table, got {}", other.type_str()),
        )),
    }
}

/// Parses and validates a TOML experiment config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let scenario = parse_scenario(raw.scenario)?;
    let horizon = raw.horizon.unwrap_or(DEFAULT_HORIZON);
    if horizon == 0 {
        return Err(Error::validation("horizon", "must be at least 1"));
    }
    let spec = scenario.at(horizon).map_err(|e| match e {
        Error::Validation { .. } | Error::UnknownScenario(_) => e,
        other => Error::validation("scenario", other.to_string()),
    })?;
    let k = spec.k();
    raw.mechanism.validate()?;
    if raw.n == 0 {
        return Err(Error::validation("n", "must be at least 1"));
    }
    let mut reports = vec![ReportStrategy::Truthful; k];
    let mut flags = vec![FlagStrategy::WellBehaved; k];
    let mut seen = vec![false; k];
    for (idx, s) in raw.strategies.into_iter().enumerate() {
        let field = format!("strategies[{idx}]");
        if s.agent == 0 || s.agent > k {
            return Err(Error::validation(
                format!("{field}.agent"),
                format!("agent {} outside 1..={k}", s.agent),
            ));
        }
        let i = s.agent - 1;
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::validation(
                format!("{field}.agent"),
                format!("agent {} listed twice", s.agent),
            ));
        }
        if let Some(r) = s.report {
            r.validate(&format!("{field}.report"))?;
            reports[i] = r;
        }
        if let Some(f) = s.flag {
            flags[i] = f;
        }
    }
    if let Some(grid) = &raw.t_grid {
        crate::analysis::check_geometric_grid(grid).map_err(|e| Error::validation("t_grid", e.to_string()))?;
    }
    Ok(ExperimentConfig {
        scenario,
        horizon,
        mechanism: raw.mechanism,
        reports,
        flags,
        n: raw.n,
        base_seed: raw.base_seed.unwrap_or(0),
        t_grid: raw.t_grid,
        out: raw.out,
        emit_traces: raw.emit_traces,
    })
}

impl ExperimentConfig {
    pub fn scenario_spec(&self) -> Result<ScenarioSpec> {
        self.scenario.at(self.horizon)
    }

    /// The episode at this config's horizon with the given seed.
    pub fn episode(&self, seed: u64) -> Result<EpisodeConfig> {
        self.episode_at(self.horizon, seed)
    }

    /// The episode at another horizon; horizon-dependent scenarios are rebuilt.
    pub fn episode_at(&self, horizon: u64, seed: u64) -> Result<EpisodeConfig> {
        Ok(EpisodeConfig {
            scenario: self.scenario.at(horizon)?,
            mechanism: self.mechanism.clone(),
            reports: self.reports.clone(),
            flags: self.flags.clone(),
            seed,
        })
    }

    pub fn k(&self) -> Result<usize> {
        Ok(self.scenario_spec()?.k())
    }

    /// SHA-256 over everything that determines the outputs, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Like [`ExperimentConfig::hash`], for outputs that also depend on
    /// parameters given outside the config file.
    pub fn hash_with<T: Serialize>(&self, extra: &T) -> String {
        let json = serde_json::to_vec(&(self, extra)).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("scenario = \"sec2-example\"\nn = 5\n[mechanism]\nkind = \"adaaudit\"\n").unwrap();
        assert_eq!(cfg.base_seed, 0);
        assert_eq!(cfg.horizon, DEFAULT_HORIZON);
        assert_eq!(cfg.reports, vec![ReportStrategy::Truthful; 2]);
        assert_eq!(cfg.flags, vec![FlagStrategy::WellBehaved; 2]);
        assert_eq!(cfg.mechanism, MechanismKind::AdaAudit);
        assert!(!cfg.emit_traces);
    }

    #[test]
    fn fixed_probability_out_of_range() {
        let err = parse_config("scenario = \"sec2-example\"\nn = 5\nmechanism = { kind = \"fixed\", p = 1.5 }\n")
            .unwrap_err();
        assert!(
            matches!(err, Error::Validation { ref field, .. } if field == "mechanism.p"),
            "{err}"
        );
    }

    #[test]
    fn library_scenario_with_k() {
        let cfg = parse_config(
            "scenario = { name = \"lb-audit-2\", k = 4 }\nn = 1\nhorizon = 50\nmechanism = { kind = \"ideal\" }\n",
        )
        .unwrap();
        let spec = cfg.scenario_spec().unwrap();
        assert_eq!(spec.k(), 4);
        assert_eq!(spec.horizon(), 50);
        assert_eq!(spec.dist(3), &UtilitySpec::PointMass(0.25));
    }

    #[test]
    fn inline_scenario_and_strategies() {
        let text = r#"
            n = 3
            base_seed = 11
            horizon = 200
            scenario = { c = 0.2, agents = [
                { kind = "point", value = 0.6 },
                { kind = "table", atoms = [[0.1, 0.5], [0.9, 0.5]] },
                { kind = "uniform", lo = 0.0, hi = 1.0 },
            ] }
            mechanism = { kind = "auxiliary" }

            [[strategies]]
            agent = 3
            report = "mark-up-when-unwatched"
            flag = "never"

            [[strategies]]
            agent = 1
            report = { scripted = { 4 = 0.9 } }
        "#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.reports[2], ReportStrategy::MarkUpWhenUnwatched);
        assert_eq!(cfg.flags[2], FlagStrategy::Never);
        assert_eq!(cfg.flags[0], FlagStrategy::WellBehaved);
        assert!(matches!(cfg.reports[0], ReportStrategy::Scripted(ref m) if m[&4] == 0.9));
        let ep = cfg.episode(5).unwrap();
        assert_eq!((ep.seed, ep.scenario.k()), (5, 3));
    }

    #[test]
    fn diagnostics_name_the_field() {
        let base = "scenario = \"sec2-example\"\nmechanism = { kind = \"adaaudit\" }\n";
        let cases = [
            ("n = 0\n", "n"),
            ("n = 1\n[[strategies]]\nagent = 3\n", "strategies[0].agent"),
            (
                "n = 1\n[[strategies]]\nagent = 1\nreport = { mark-down = 1.5 }\n",
                "strategies[0].report",
            ),
            ("n = 1\nt_grid = [10]\n", "t_grid"),
        ];
        for (extra, field) in cases {
            let err = parse_config(&format!("{base}{extra}")).unwrap_err();
            assert!(
                matches!(err, Error::Validation { field: ref f, .. } if f == field),
                "{extra}: {err}"
            );
        }
        let err = parse_config("scenario = { c = 0.2, agents = [{ kind = \"point\", value = 2.0 }, { kind = \"point\", value = 0.5 }] }\nn = 1\nmechanism = { kind = \"adaaudit\" }\n").unwrap_err();
        assert!(
            matches!(err, Error::Parse(ref m) if m.contains("outside [0, 1]")),
            "{err}"
        );
        let err = parse_config("scenario = \"sec2-example\"\nn = 1\nmechanism = { kind = \"adaaudit\" }\nbogus = 1\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.contains("bogus")), "{err}");
        assert!(matches!(
            parse_config("scenario = \"nope\"\nn = 1\nmechanism = { kind = \"adaaudit\" }\n"),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse_config("scenario = \"sec2-example\"\nn = 5\nmechanism = { kind = \"adaaudit\" }\n").unwrap();
        let b = parse_config("scenario = \"sec2-example\"\nn = 6\nmechanism = { kind = \"adaaudit\" }\n").unwrap();
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
    }
}

//! Metrics over traces, audit-growth sweeps, paired deviation gains and the
//! coupling check between the adaptive rule and the auxiliary game.

use serde::{Deserialize, Serialize};

use crate::agents::{FlagStrategy, ReportStrategy};
use crate::distributions::{lex_beats, ScenarioSpec};
use crate::engine::{replicate, run_episode, run_episode_with, EpisodeConfig, EpisodeEnd, RoundRecord, Trace};
use crate::error::{Error, Result};
use crate::mechanism::MechanismKind;

/// Per-episode metrics. Utilities and counts are indexed by 0-based agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    /// Σ_t (max over all agents of u_t − winner's u_t), with 0 for no allocation.
    pub regret: f64,
    pub audits: u64,
    pub utility: Vec<f64>,
    pub d_counts: Vec<u64>,
    pub eliminations: u64,
    pub epochs: u64,
    /// Σ_t max over all agents of u_t.
    pub welfare: f64,
    /// Regret against the best alive agent only. Not the headline metric.
    pub alive_regret: f64,
}

impl MetricsRow {
    /// `|regret + Σ utility − welfare|`, zero up to rounding.
    pub fn welfare_gap(&self) -> f64 {
        (self.regret + self.utility.iter().sum::<f64>() - self.welfare).abs()
    }
}

/// Whether alive agent `i` lost a round it would have won by reporting its
/// utility: it held at least `c` and beat every other alive report.
pub fn missed_fair_win(record: &RoundRecord, i: usize, c: f64) -> bool {
    let u = record.utilities[i];
    record.alive.contains(i)
        && record.outcome.winner != Some(i)
        && u >= c
        && record
            .alive
            .without(i)
            .iter()
            .all(|j| lex_beats(u, i, record.reports[j].expect("alive agents report"), j))
}

/// Folds rounds into a [`MetricsRow`] without keeping the trace.
#[derive(Clone, Debug)]
pub struct MetricsAccumulator {
    c: f64,
    row: MetricsRow,
}

impl MetricsAccumulator {
    pub fn new(scenario: &ScenarioSpec) -> Self {
        let k = scenario.k();
        MetricsAccumulator {
            c: scenario.c(),
            row: MetricsRow {
                seed: 0,
                regret: 0.0,
                audits: 0,
                utility: vec![0.0; k],
                d_counts: vec![0; k],
                eliminations: 0,
                epochs: 1,
                welfare: 0.0,
                alive_regret: 0.0,
            },
        }
    }

    pub fn observe(&mut self, record: &RoundRecord) {
        let row = &mut self.row;
        let best = record.utilities.iter().copied().fold(0.0, f64::max);
        let best_alive = record.alive.iter().map(|i| record.utilities[i]).fold(0.0, f64::max);
        let gained = match record.outcome.winner {
            Some(w) => {
                row.utility[w] += record.utilities[w];
                record.utilities[w]
            }
            None => 0.0,
        };
        row.welfare += best;
        row.regret += best - gained;
        row.alive_regret += best_alive - gained;
        row.audits += u64::from(record.outcome.audited);
        row.eliminations += u64::from(record.outcome.eliminated.is_some());
        for i in record.alive {
            if missed_fair_win(record, i, self.c) {
                row.d_counts[i] += 1;
            }
        }
    }

    pub fn finish(mut self, seed: u64, end: &EpisodeEnd) -> MetricsRow {
        self.row.seed = seed;
        self.row.epochs = end.epoch_boundaries.len() as u64;
        self.row
    }
}

/// Runs an episode and returns its metrics without storing rounds.
pub fn episode_metrics(config: &EpisodeConfig) -> Result<MetricsRow> {
    let mut acc = MetricsAccumulator::new(&config.scenario);
    let end = run_episode_with(config, |r| acc.observe(r))?;
    Ok(acc.finish(config.seed, &end))
}

pub fn metrics_of(trace: &Trace, scenario: &ScenarioSpec) -> MetricsRow {
    let mut acc = MetricsAccumulator::new(scenario);
    trace.rounds.iter().for_each(|r| acc.observe(r));
    acc.finish(
        trace.seed,
        &EpisodeEnd {
            final_alive: trace.final_alive,
            epoch_boundaries: trace.epoch_boundaries.clone(),
        },
    )
}

/// Hindsight welfare regret of a trace.
pub fn regret_of(trace: &Trace) -> f64 {
    trace
        .rounds
        .iter()
        .map(|r| {
            let best = r.utilities.iter().copied().fold(0.0, f64::max);
            best - r.outcome.winner.map_or(0.0, |w| r.utilities[w])
        })
        .sum()
}

/// Per-agent count of missed fair wins.
pub fn d_counts_of(trace: &Trace, scenario: &ScenarioSpec) -> Vec<u64> {
    let mut counts = vec![0; scenario.k()];
    for r in &trace.rounds {
        for i in r.alive {
            counts[i] += u64::from(missed_fair_win(r, i, scenario.c()));
        }
    }
    counts
}

/// Mean, standard error and count of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

impl Summary {
    pub fn of<I: IntoIterator<Item = f64>>(values: I) -> Summary {
        let values: Vec<f64> = values.into_iter().collect();
        let n = values.len();
        if n == 0 {
            return Summary {
                mean: f64::NAN,
                stderr: f64::NAN,
                n: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Summary {
            mean,
            stderr,
            n: n as u64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub horizon: u64,
    pub audits: Summary,
    pub regret: Summary,
    /// Largest [`MetricsRow::welfare_gap`] among the replications.
    pub max_welfare_gap: f64,
}

/// Mean audits over a geometric horizon grid, with a least-squares fit of
/// mean audits against `ln T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSweep {
    pub points: Vec<SweepPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

impl AuditSweep {
    /// Slopes of mean audits against `ln T` between consecutive grid points.
    pub fn segment_slopes(&self) -> Vec<f64> {
        self.points
            .windows(2)
            .map(|w| (w[1].audits.mean - w[0].audits.mean) / ((w[1].horizon as f64).ln() - (w[0].horizon as f64).ln()))
            .collect()
    }

    /// Mean audits at the last grid point over the one before it.
    pub fn last_ratio(&self) -> f64 {
        let n = self.points.len();
        self.points[n - 1].audits.mean / self.points[n - 2].audits.mean
    }
}

/// Checks a horizon grid has at least three strictly increasing points with a
/// constant ratio.
pub fn check_geometric_grid(grid: &[u64]) -> Result<()> {
    if grid.len() < 3 {
        return Err(Error::DegenerateGrid(format!(
            "need at least 3 horizons, got {}",
            grid.len()
        )));
    }
    if grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DegenerateGrid(
            "horizons must be positive and strictly increasing".into(),
        ));
    }
    let ratio = grid[1] as f64 / grid[0] as f64;
    for w in grid.windows(2) {
        let r = w[1] as f64 / w[0] as f64;
        if (r / ratio - 1.0).abs() > 1e-3 {
            return Err(Error::DegenerateGrid(format!(
                "ratio {r} differs from {ratio}; spacing must be geometric"
            )));
        }
    }
    Ok(())
}

/// Runs `n` replications at every horizon of `grid` and fits mean audits
/// against `ln T`. `make_config` builds the episode for a horizon, so
/// horizon-dependent scenarios are re-instantiated per point.
pub fn audits_vs_log_t<F>(make_config: F, grid: &[u64], n: u64, base_seed: u64) -> Result<AuditSweep>
where
    F: Fn(u64) -> Result<EpisodeConfig>,
{
    check_geometric_grid(grid)?;
    let mut points = Vec::with_capacity(grid.len());
    for &horizon in grid {
        let config = make_config(horizon)?;
        let rows = replicate(n, base_seed, |seed| episode_metrics(&config.clone().with_seed(seed)))?;
        points.push(SweepPoint {
            horizon,
            audits: Summary::of(rows.iter().map(|r| r.audits as f64)),
            regret: Summary::of(rows.iter().map(|r| r.regret)),
            max_welfare_gap: rows.iter().map(MetricsRow::welfare_gap).fold(0.0, f64::max),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.horizon as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.audits.mean).collect();
    let m = xs.len() as f64;
    let x_bar = xs.iter().sum::<f64>() / m;
    let y_bar = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_bar) * (y - y_bar)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - x_bar).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    Ok(AuditSweep {
        points,
        slope,
        intercept,
        residuals,
    })
}

/// Paired comparison of one agent's total utility under a baseline profile
/// and under a unilateral deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    /// 0-based agent index.
    pub agent: usize,
    pub baseline_mean: f64,
    pub deviant_mean: f64,
    pub paired_diff_mean: f64,
    pub paired_diff_stderr: f64,
    pub n: u64,
    /// Largest [`MetricsRow::welfare_gap`] over both profiles.
    pub max_welfare_gap: f64,
}

/// Estimates the gain of `agent` from switching to the deviant strategies.
///
/// Both profiles run on the same replication seeds, so they share every
/// utility draw; the standard error is that of the paired differences.
pub fn deviation_gain(
    base: &EpisodeConfig,
    agent: usize,
    deviant_report: ReportStrategy,
    deviant_flag: FlagStrategy,
    n: u64,
    base_seed: u64,
) -> Result<DeviationReport> {
    if n < 2 {
        return Err(Error::validation(
            "n",
            "deviation estimates need at least 2 replications",
        ));
    }
    if agent >= base.scenario.k() {
        return Err(Error::validation("agent", format!("agent {} out of range", agent + 1)));
    }
    let deviant = base.clone().with_agent(agent, deviant_report, deviant_flag);
    let pairs = replicate(n, base_seed, |seed| {
        let b = episode_metrics(&base.clone().with_seed(seed))?;
        let d = episode_metrics(&deviant.clone().with_seed(seed))?;
        Ok((b.utility[agent], d.utility[agent], b.welfare_gap().max(d.welfare_gap())))
    })?;
    let diffs = Summary::of(pairs.iter().map(|(b, d, _)| d - b));
    Ok(DeviationReport {
        agent,
        baseline_mean: Summary::of(pairs.iter().map(|p| p.0)).mean,
        deviant_mean: Summary::of(pairs.iter().map(|p| p.1)).mean,
        paired_diff_mean: diffs.mean,
        paired_diff_stderr: diffs.stderr,
        n,
        max_welfare_gap: pairs.iter().map(|p| p.2).fold(0.0, f64::max),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingVerdict {
    pub coupled: bool,
    /// First round where winners or alive sets differ.
    pub first_divergence: Option<u64>,
}

/// Runs the adaptive rule with well-behaved flagging and the auxiliary game
/// on the same seed and compares winners and alive sets round by round.
///
/// A report profile that marks up where the auxiliary game forbids it is a
/// precondition failure and comes back as `Err(RestrictedMarkUp)`.
pub fn coupling_check(scenario: &ScenarioSpec, reports: &[ReportStrategy], seed: u64) -> Result<CouplingVerdict> {
    let k = scenario.k();
    if reports.len() != k {
        return Err(Error::LengthMismatch {
            what: "report strategies",
            expected: k,
            actual: reports.len(),
        });
    }
    let build = |kind| EpisodeConfig {
        scenario: scenario.clone(),
        mechanism: kind,
        reports: reports.to_vec(),
        flags: vec![FlagStrategy::WellBehaved; k],
        seed,
    };
    let aux = run_episode(&build(MechanismKind::Auxiliary))?;
    let actual = run_episode(&build(MechanismKind::AdaAudit))?;
    let first_divergence = actual
        .rounds
        .iter()
        .zip(&aux.rounds)
        .find(|(a, b)| a.outcome.winner != b.outcome.winner || a.alive != b.alive)
        .map(|(a, _)| a.round())
        .or_else(|| (actual.final_alive != aux.final_alive).then_some(scenario.horizon() + 1));
    Ok(CouplingVerdict {
        coupled: first_divergence.is_none(),
        first_divergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent_set::AgentSet;
    use crate::distributions::UtilitySpec;
    use crate::mechanism::RoundOutcome;

    fn record(alive: &[usize], utilities: &[f64], reports: &[Option<f64>], winner: Option<usize>) -> RoundRecord {
        RoundRecord {
            alive: AgentSet::from_indices(alive.iter().copied()),
            utilities: utilities.to_vec(),
            reports: reports.to_vec(),
            outcome: RoundOutcome {
                round: 1,
                winner,
                ..Default::default()
            },
        }
    }

    fn trace_of(rounds: Vec<RoundRecord>) -> Trace {
        Trace {
            seed: 0,
            final_alive: AgentSet::full(2),
            epoch_boundaries: vec![1],
            rounds,
        }
    }

    fn points(values: &[f64], horizon: u64, c: f64) -> ScenarioSpec {
        ScenarioSpec::new(
            horizon,
            c,
            values.iter().map(|&v| UtilitySpec::point(v).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn regret_counts_idle_rounds_at_best_utility() {
        let t = trace_of(vec![record(&[0, 1], &[2.0 / 3.0, 0.1], &[Some(0.2), Some(0.1)], None)]);
        assert_eq!(regret_of(&t), 2.0 / 3.0);
        let t = trace_of(vec![record(&[0, 1], &[0.6, 0.4], &[Some(0.6), Some(0.4)], Some(0))]);
        assert_eq!(regret_of(&t), 0.0);
    }

    #[test]
    fn regret_benchmark_includes_eliminated_agents() {
        let t = trace_of(vec![record(&[1], &[0.9, 0.4], &[None, Some(0.4)], Some(1))]);
        let row = metrics_of(&t, &points(&[0.9, 0.4], 1, 0.3));
        assert!((row.regret - 0.5).abs() < 1e-15);
        assert_eq!(row.alive_regret, 0.0);
    }

    #[test]
    fn always_picking_the_point_mass_costs_a_ninth_per_round() {
        // Agent 2 beats agent 1 only when it draws 1 (prob 1/3), losing 1/3 each time.
        let scenario = ScenarioSpec::new(
            1,
            1.0 / 3.0,
            vec![
                UtilitySpec::point(2.0 / 3.0).unwrap(),
                UtilitySpec::scaled_bernoulli(1.0 / 3.0, 1.0, 1.0 / 3.0).unwrap(),
            ],
        )
        .unwrap();
        let closed_form = (1.0 / 3.0) * (1.0 / 3.0);
        let rows = replicate(200_000, 5, |seed| {
            let mut rng = crate::rng::utility_stream(seed, 1);
            let u2 = scenario.dist(1).sample(&mut rng);
            let t = trace_of(vec![record(&[0, 1], &[2.0 / 3.0, u2], &[Some(1.0), Some(u2)], Some(0))]);
            Ok(regret_of(&t))
        })
        .unwrap();
        let s = Summary::of(rows);
        assert!(
            (s.mean - closed_form).abs() <= 4.0 * s.stderr,
            "{} vs {closed_form}",
            s.mean
        );
    }

    #[test]
    fn d_count_clauses() {
        let c = 0.3;
        // Agent 1 marks down to 0 and loses to 0.5 although it holds 0.9.
        let r = record(&[0, 1], &[0.9, 0.5], &[Some(0.0), Some(0.5)], Some(1));
        assert!(missed_fair_win(&r, 0, c));
        assert!(!missed_fair_win(&r, 1, c));
        // Below c never counts.
        let r = record(&[0, 1], &[0.2, 0.1], &[Some(0.0), Some(0.1)], Some(1));
        assert!(!missed_fair_win(&r, 0, c));
        // Ties go to the higher index: agent 1 with u = 0.5 does not beat agent 2's 0.5.
        let r = record(&[0, 1], &[0.5, 0.5], &[Some(0.0), Some(0.5)], Some(1));
        assert!(!missed_fair_win(&r, 0, c));
        let r = record(&[0, 1], &[0.5, 0.5], &[Some(0.5), Some(0.0)], Some(0));
        assert!(missed_fair_win(&r, 1, c));
        // Eliminated agents are not counted.
        let r = record(&[1], &[0.9, 0.5], &[None, Some(0.5)], Some(1));
        assert!(!missed_fair_win(&r, 0, c));
    }

    #[test]
    fn mark_down_dominant_agent_misses_every_round() {
        let config = EpisodeConfig::new(points(&[0.9, 0.5], 10, 0.3), MechanismKind::AdaAudit).with_agent(
            0,
            ReportStrategy::MarkDown(0.0),
            FlagStrategy::WellBehaved,
        );
        let trace = run_episode(&config).unwrap();
        assert_eq!(d_counts_of(&trace, &config.scenario), vec![10, 0]);
        let row = metrics_of(&trace, &config.scenario);
        assert_eq!(row.d_counts, vec![10, 0]);
        assert_eq!(row, episode_metrics(&config).unwrap());
    }

    #[test]
    fn grid_checks() {
        assert!(matches!(check_geometric_grid(&[1000]), Err(Error::DegenerateGrid(_))));
        assert!(check_geometric_grid(&[100, 1000]).is_err());
        assert!(check_geometric_grid(&[100, 1000, 5000]).is_err());
        assert!(check_geometric_grid(&[100, 100, 100]).is_err());
        assert!(check_geometric_grid(&[2000, 20000, 200000]).is_ok());
    }

    #[test]
    fn fixed_prob_audits_grow_linearly() {
        let scenario = points(&[0.6, 0.4], 1, 0.3);
        let sweep = audits_vs_log_t(
            |t| {
                Ok(EpisodeConfig::new(
                    scenario.with_horizon(t)?,
                    MechanismKind::FixedProb { p: 0.1 },
                ))
            },
            &[200, 2000, 20000],
            20,
            1,
        )
        .unwrap();
        let ratio = sweep.last_ratio();
        assert!((ratio - 10.0).abs() < 1.0, "ratio {ratio}");
        let slopes = sweep.segment_slopes();
        assert!(slopes[1] > 5.0 * slopes[0]);
    }

    #[test]
    fn identical_deviation_has_zero_gain() {
        let scenario = ScenarioSpec::new(
            200,
            0.2,
            vec![
                UtilitySpec::table([(0.3, 0.5), (0.8, 0.5)]).unwrap(),
                UtilitySpec::uniform(0.2, 0.9).unwrap(),
            ],
        )
        .unwrap();
        let base = EpisodeConfig::new(scenario, MechanismKind::AdaAudit);
        let rep = deviation_gain(&base, 0, ReportStrategy::Truthful, FlagStrategy::WellBehaved, 10, 3).unwrap();
        assert_eq!(rep.paired_diff_mean, 0.0);
        assert_eq!(rep.paired_diff_stderr, 0.0);
        assert!(deviation_gain(&base, 0, ReportStrategy::Truthful, FlagStrategy::Never, 1, 3).is_err());
    }

    #[test]
    fn truthful_profile_couples() {
        let scenario = ScenarioSpec::new(
            500,
            0.2,
            vec![
                UtilitySpec::table([(0.1, 0.5), (0.9, 0.5)]).unwrap(),
                UtilitySpec::point(0.5).unwrap(),
            ],
        )
        .unwrap();
        let verdict = coupling_check(&scenario, &[ReportStrategy::Truthful, ReportStrategy::Truthful], 4).unwrap();
        assert_eq!(
            verdict,
            CouplingVerdict {
                coupled: true,
                first_divergence: None
            }
        );
        let illegal = [ReportStrategy::MarkUpAlways(1.0), ReportStrategy::Truthful];
        assert!(matches!(
            coupling_check(&scenario, &illegal, 4),
            Err(Error::RestrictedMarkUp { .. })
        ));
    }

    #[test]
    fn summary_stats() {
        let s = Summary::of([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(Summary::of([7.0]).stderr, 0.0);
    }
}

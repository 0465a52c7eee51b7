//! On-disk formats: the metrics table, the JSON summary and NDJSON traces.
//!
//! Agent numbers are 1-based in every format and `0` means "nobody".

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::agent_set::AgentSet;
use crate::analysis::{MetricsRow, Summary};
use crate::engine::{EpisodeConfig, RoundRecord, Trace};
use crate::error::{Error, Result};
use crate::mechanism::{Proposal, RoundOutcome};

/// Comment line carried at the top of every metrics file.
pub fn provenance_line(config_hash: &str, base_seed: u64) -> String {
    format!("# config_hash={config_hash} base_seed={base_seed}")
}

/// Column names of the metrics table for `k` agents.
pub fn metrics_header(k: usize) -> Vec<String> {
    let mut cols = vec!["seed".to_string(), "regret".into(), "audits".into()];
    cols.extend((1..=k).map(|i| format!("utility_{i}")));
    cols.extend((1..=k).map(|i| format!("dcount_{i}")));
    cols.extend(["eliminations".into(), "epochs".into()]);
    cols
}

/// Writes the metrics table: a provenance comment, a header, one row per
/// replication.
pub fn write_metrics_csv<W: Write>(
    mut out: W,
    rows: &[MetricsRow],
    k: usize,
    config_hash: &str,
    base_seed: u64,
) -> Result<()> {
    writeln!(out, "{}", provenance_line(config_hash, base_seed))?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(metrics_header(k)).map_err(io)?;
    for row in rows {
        let mut rec = vec![row.seed.to_string(), row.regret.to_string(), row.audits.to_string()];
        rec.extend(row.utility.iter().map(f64::to_string));
        rec.extend(row.d_counts.iter().map(u64::to_string));
        rec.extend([row.eliminations.to_string(), row.epochs.to_string()]);
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON summary of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub base_seed: u64,
    pub mechanism: String,
    pub k: usize,
    pub horizon: u64,
    pub n: u64,
    pub regret: Summary,
    pub alive_regret: Summary,
    pub audits: Summary,
    pub eliminations: Summary,
    pub epochs: Summary,
    pub utility: Vec<Summary>,
    pub d_counts: Vec<Summary>,
    /// Largest `|regret + Σ utility − welfare|` over all replications.
    pub max_welfare_gap: f64,
}

impl RunSummary {
    pub fn from_rows(
        rows: &[MetricsRow],
        config_hash: &str,
        base_seed: u64,
        mechanism: &str,
        k: usize,
        horizon: u64,
    ) -> Self {
        let col = |f: &dyn Fn(&MetricsRow) -> f64| Summary::of(rows.iter().map(f));
        RunSummary {
            config_hash: config_hash.to_string(),
            base_seed,
            mechanism: mechanism.to_string(),
            k,
            horizon,
            n: rows.len() as u64,
            regret: col(&|r| r.regret),
            alive_regret: col(&|r| r.alive_regret),
            audits: col(&|r| r.audits as f64),
            eliminations: col(&|r| r.eliminations as f64),
            epochs: col(&|r| r.epochs as f64),
            utility: (0..k).map(|i| col(&|r| r.utility[i])).collect(),
            d_counts: (0..k).map(|i| col(&|r| r.d_counts[i] as f64)).collect(),
            max_welfare_gap: rows.iter().map(MetricsRow::welfare_gap).fold(0.0, f64::max),
        }
    }
}

/// First line of a trace file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub config_hash: String,
    pub seed: u64,
    pub k: usize,
    pub horizon: u64,
    pub mechanism: String,
    pub final_alive: AgentSet,
    pub epoch_boundaries: Vec<u64>,
}

/// A proposal as written to traces, with a 1-based agent number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalLine {
    pub agent: usize,
    pub estimate: f64,
}

/// One round of a trace file. Fields appear in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundLine {
    pub t: u64,
    pub alive: AgentSet,
    pub utilities: Vec<f64>,
    pub reports: Vec<Option<f64>>,
    pub winner: usize,
    pub audit_probability: f64,
    pub audited: bool,
    pub observed_utility: f64,
    pub eliminated: usize,
    pub proposal: Option<ProposalLine>,
    pub flags: Vec<u8>,
    pub installed: bool,
}

fn to_number(agent: Option<usize>) -> usize {
    agent.map_or(0, |a| a + 1)
}

fn from_number(n: usize) -> Option<usize> {
    n.checked_sub(1)
}

impl From<&RoundRecord> for RoundLine {
    fn from(r: &RoundRecord) -> Self {
        let o = &r.outcome;
        RoundLine {
            t: o.round,
            alive: r.alive,
            utilities: r.utilities.clone(),
            reports: r.reports.clone(),
            winner: to_number(o.winner),
            audit_probability: o.audit_probability,
            audited: o.audited,
            observed_utility: o.observed_utility,
            eliminated: to_number(o.eliminated),
            proposal: o.proposal.map(|p| ProposalLine {
                agent: p.agent + 1,
                estimate: p.estimate,
            }),
            flags: o.flags.iter().map(|&f| u8::from(f)).collect(),
            installed: o.installed,
        }
    }
}

impl RoundLine {
    pub fn into_record(self) -> Result<RoundRecord> {
        let proposal = match self.proposal {
            Some(p) => Some(Proposal {
                agent: from_number(p.agent)
                    .ok_or_else(|| Error::Parse(format!("round {}: proposal for agent 0", self.t)))?,
                estimate: p.estimate,
            }),
            None => None,
        };
        Ok(RoundRecord {
            alive: self.alive,
            utilities: self.utilities,
            reports: self.reports,
            outcome: RoundOutcome {
                round: self.t,
                winner: from_number(self.winner),
                audit_probability: self.audit_probability,
                audited: self.audited,
                observed_utility: self.observed_utility,
                eliminated: from_number(self.eliminated),
                proposal,
                flags: self.flags.iter().map(|&f| f != 0).collect(),
                installed: self.installed,
            },
        })
    }
}

/// Writes a trace as NDJSON: a header line, then one line per round.
pub fn write_trace_ndjson<W: Write>(mut out: W, config: &EpisodeConfig, trace: &Trace) -> Result<()> {
    let header = TraceHeader {
        config_hash: config.hash(),
        seed: trace.seed,
        k: config.scenario.k(),
        horizon: config.scenario.horizon(),
        mechanism: config.mechanism.name().to_string(),
        final_alive: trace.final_alive,
        epoch_boundaries: trace.epoch_boundaries.clone(),
    };
    let json = |e: serde_json::Error| Error::Io(e.to_string());
    serde_json::to_writer(&mut out, &header).map_err(json)?;
    out.write_all(b"\n")?;
    for r in &trace.rounds {
        serde_json::to_writer(&mut out, &RoundLine::from(r)).map_err(json)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_ndjson`].
pub fn read_trace_ndjson<R: BufRead>(input: R) -> Result<(TraceHeader, Trace)> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| Error::Parse("empty trace file".into()))??;
    let header: TraceHeader = serde_json::from_str(&first).map_err(|e| Error::Parse(format!("trace header: {e}")))?;
    let mut rounds = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RoundLine =
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("trace line {}: {e}", n + 2)))?;
        rounds.push(parsed.into_record()?);
    }
    let trace = Trace {
        seed: header.seed,
        rounds,
        final_alive: header.final_alive,
        epoch_boundaries: header.epoch_boundaries.clone(),
    };
    Ok((header, trace))
}

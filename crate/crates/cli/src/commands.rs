use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use fairaudit::analysis::{audits_vs_log_t, coupling_check, deviation_gain, episode_metrics, metrics_of};
use fairaudit::config::{parse_config, ExperimentConfig};
use fairaudit::engine::{replicate, run_replications};
use fairaudit::output::{write_metrics_csv, write_trace_ndjson, RunSummary};
use fairaudit::{exact_fair_shares, mc_fair_shares, rng, scenarios, AgentSet, FlagStrategy, ReportStrategy};

use crate::RunArgs;

/// Loads the config named by `args` and applies the command-line overrides.
fn load(args: &RunArgs) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("in {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(reps) = args.reps {
        if reps == 0 {
            bail!("--reps must be at least 1");
        }
        cfg.n = reps;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

/// Refuses to overwrite `path` when it was produced by another config.
fn check_existing(path: &Path, hash: &str, force: bool) -> Result<()> {
    if force || !path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let previous: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    match previous.get("config_hash").and_then(|h| h.as_str()) {
        Some(h) if h == hash => Ok(()),
        Some(h) => bail!(
            "{} was written by config {h}, not {hash}; pass --force to overwrite",
            path.display()
        ),
        None => bail!("{} has no config_hash; pass --force to overwrite", path.display()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Prints `value` and, when the config names an output directory, also
/// writes it there as `file_name`.
fn emit(cfg: &ExperimentConfig, force: bool, file_name: &str, value: &serde_json::Value) -> Result<()> {
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(file_name);
        let hash = value["config_hash"].as_str().expect("outputs carry their config hash");
        check_existing(&path, hash, force)?;
        write_json(&path, value)?;
    }
    print_json(value)
}

pub fn run(args: &RunArgs, emit_traces: bool) -> Result<()> {
    let cfg = load(args)?;
    let emit_traces = emit_traces || cfg.emit_traces;
    let Some(out) = cfg.out.clone() else {
        bail!("no output directory: set `out` in the config or pass --out");
    };
    let hash = cfg.hash();
    let summary_path = out.join("summary.json");
    check_existing(&summary_path, &hash, args.force)?;

    let base = cfg.episode(0)?;
    let k = base.scenario.k();
    let (rows, traces) = if emit_traces {
        let traces = run_replications(&base, cfg.n, cfg.base_seed)?;
        let rows = traces.iter().map(|t| metrics_of(t, &base.scenario)).collect();
        (rows, traces)
    } else {
        let rows = replicate(cfg.n, cfg.base_seed, |seed| {
            episode_metrics(&base.clone().with_seed(seed))
        })?;
        (rows, Vec::new())
    };
    let summary = RunSummary::from_rows(&rows, &hash, cfg.base_seed, base.mechanism.name(), k, cfg.horizon);

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let metrics = BufWriter::new(File::create(out.join("metrics.csv"))?);
    write_metrics_csv(metrics, &rows, k, &hash, cfg.base_seed)?;
    for trace in &traces {
        let path = out.join(format!("trace_{}.ndjson", trace.seed));
        let episode = base.clone().with_seed(trace.seed);
        write_trace_ndjson(BufWriter::new(File::create(&path)?), &episode, trace)?;
    }
    write_json(&summary_path, &summary)?;

    println!(
        "{} x{}: regret {:.4} ± {:.4}, audits {:.2} ± {:.2}, eliminations {:.3}",
        summary.mechanism,
        summary.n,
        summary.regret.mean,
        summary.regret.stderr,
        summary.audits.mean,
        summary.audits.stderr,
        summary.eliminations.mean
    );
    println!("wrote {}", out.display());
    Ok(())
}

pub fn sweep(args: &RunArgs, grid: Option<Vec<u64>>) -> Result<()> {
    let mut cfg = load(args)?;
    if grid.is_some() {
        cfg.t_grid = grid;
    }
    let Some(grid) = cfg.t_grid.clone() else {
        bail!("no horizon grid: set `t_grid` in the config or pass --grid");
    };
    let result = audits_vs_log_t(|t| cfg.episode_at(t, 0), &grid, cfg.n, cfg.base_seed)?;
    let value = json!({
        "config_hash": cfg.hash(),
        "base_seed": cfg.base_seed,
        "mechanism": cfg.mechanism.name(),
        "n": cfg.n,
        "points": result.points,
        "slope": result.slope,
        "intercept": result.intercept,
        "residuals": result.residuals,
        "segment_slopes": result.segment_slopes(),
        "last_ratio": result.last_ratio(),
    });
    emit(&cfg, args.force, "sweep.json", &value)
}

/// Parses `name` or `name=value` into a strategy using its serde names.
fn parse_strategy<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let value = match text.split_once('=') {
        Some((name, v)) => {
            let v: f64 = v.trim().parse().with_context(|| format!("`{v}` is not a number"))?;
            json!({ name.trim(): v })
        }
        None => json!(text.trim()),
    };
    serde_json::from_value(value).with_context(|| format!("unknown strategy `{text}`"))
}

pub fn deviation(args: &RunArgs, agent: usize, report: &str, flag: Option<&str>) -> Result<()> {
    let cfg = load(args)?;
    let k = cfg.k()?;
    if agent == 0 || agent > k {
        bail!("--agent {agent} outside 1..={k}");
    }
    let i = agent - 1;
    let report: ReportStrategy = parse_strategy(report)?;
    report.validate("--report")?;
    let flag: FlagStrategy = match flag {
        Some(f) => parse_strategy(f)?,
        None => cfg.flags[i],
    };
    let base = cfg.episode(0)?;
    let result = deviation_gain(&base, i, report.clone(), flag, cfg.n, cfg.base_seed)?;
    let hash = cfg.hash_with(&(agent, &report, flag));
    let value = json!({
        "config_hash": hash,
        "base_seed": cfg.base_seed,
        "agent": agent,
        "report": report,
        "flag": flag,
        "baseline_mean": result.baseline_mean,
        "deviant_mean": result.deviant_mean,
        "paired_diff_mean": result.paired_diff_mean,
        "paired_diff_stderr": result.paired_diff_stderr,
        "n": result.n,
    });
    emit(&cfg, args.force, "deviation.json", &value)
}

pub fn couple(args: &RunArgs) -> Result<()> {
    let cfg = load(args)?;
    let scenario = cfg.scenario_spec()?;
    let verdicts = replicate(cfg.n, cfg.base_seed, |seed| {
        coupling_check(&scenario, &cfg.reports, seed).map(|v| (seed, v))
    })?;
    let diverged: Vec<_> = verdicts
        .iter()
        .filter(|(_, v)| !v.coupled)
        .map(|(seed, v)| json!({ "seed": seed, "first_divergence": v.first_divergence }))
        .collect();
    let value = json!({
        "config_hash": cfg.hash(),
        "base_seed": cfg.base_seed,
        "n": cfg.n,
        "coupled": diverged.is_empty(),
        "divergences": diverged,
    });
    emit(&cfg, args.force, "couple.json", &value)
}

pub fn fairshare(
    name: &str,
    k: Option<usize>,
    horizon: u64,
    alive: Option<Vec<usize>>,
    mc: Option<u64>,
    seed: u64,
) -> Result<()> {
    let scenario = scenarios::instantiate(name, k, horizon)?;
    let k = scenario.k();
    let alive = match alive {
        Some(list) => {
            if let Some(bad) = list.iter().find(|&&a| a == 0 || a > k) {
                bail!("--alive: agent {bad} outside 1..={k}");
            }
            AgentSet::from_indices(list.iter().map(|a| a - 1))
        }
        None => scenario.all_agents(),
    };
    let shares = match mc {
        Some(n) => mc_fair_shares(&scenario, alive, n, &mut rng::mechanism_stream(seed))?,
        None => exact_fair_shares(&scenario, alive)?,
    };
    println!("scenario {name}  K = {k}  c = {}  alive {}", scenario.c(), shares.alive);
    println!("{:>5}  {:>20}  {:>20}", "agent", "q", "mu");
    for i in alive.iter() {
        println!("{:>5}  {:>20}  {:>20}", i + 1, shares.q[i], shares.mu[i]);
    }
    Ok(())
}

pub fn scenarios() -> Result<()> {
    for entry in scenarios::library() {
        let k = if entry.variable_k {
            format!("K >= 2 (default {})", entry.default_k)
        } else {
            format!("K = {}", entry.default_k)
        };
        println!("{}\t{k}\t{}", entry.name, entry.provenance);
    }
    Ok(())
}

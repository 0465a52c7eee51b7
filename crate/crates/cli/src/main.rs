use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

/// Experiments with audited, payment-free repeated allocation.
#[derive(Parser)]
#[command(name = "fairaudit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides shared by every config-driven subcommand.
#[derive(clap::Args)]
pub struct RunArgs {
    /// Experiment config (TOML).
    pub config: PathBuf,
    /// Base seed; replication seeds are derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of replications.
    #[arg(long)]
    pub reps: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite outputs produced by a different config.
    #[arg(long)]
    pub force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run replications and write metrics.csv and summary.json.
    Run {
        #[command(flatten)]
        args: RunArgs,
        /// Also write one NDJSON trace per replication.
        #[arg(long)]
        emit_traces: bool,
    },
    /// Mean audits over a geometric horizon grid, fitted against ln T.
    Sweep {
        #[command(flatten)]
        args: RunArgs,
        /// Comma-separated horizons, e.g. 2000,20000,200000.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<u64>>,
    },
    /// Paired estimate of one agent's gain from a unilateral deviation.
    Deviation {
        #[command(flatten)]
        args: RunArgs,
        /// Deviating agent (1-based).
        #[arg(long)]
        agent: usize,
        /// Deviant report strategy: `truthful`, `mark-up-always=V`,
        /// `mark-up-when-unwatched` or `mark-down=F`.
        #[arg(long)]
        report: String,
        /// Deviant flag strategy; defaults to the agent's configured one.
        #[arg(long)]
        flag: Option<String>,
    },
    /// Fair winning probabilities and fair shares of a library scenario.
    Fairshare {
        /// Library scenario name.
        scenario: String,
        /// Agent count for scenarios that take one.
        #[arg(long)]
        k: Option<usize>,
        /// Horizon, for horizon-dependent scenarios.
        #[arg(long, default_value_t = 1000)]
        horizon: u64,
        /// Comma-separated alive agents (1-based); all agents by default.
        #[arg(long, value_delimiter = ',')]
        alive: Option<Vec<usize>>,
        /// Estimate by Monte Carlo with this many joint draws.
        #[arg(long)]
        mc: Option<u64>,
        /// Seed for the Monte-Carlo estimate.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check that the adaptive rule and the auxiliary game stay coupled.
    Couple {
        #[command(flatten)]
        args: RunArgs,
    },
    /// List the built-in scenarios.
    Scenarios,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { args, emit_traces } => commands::run(&args, emit_traces),
        Command::Sweep { args, grid } => commands::sweep(&args, grid),
        Command::Deviation {
            args,
            agent,
            report,
            flag,
        } => commands::deviation(&args, agent, &report, flag.as_deref()),
        Command::Fairshare {
            scenario,
            k,
            horizon,
            alive,
            mc,
            seed,
        } => commands::fairshare(&scenario, k, horizon, alive, mc, seed),
        Command::Couple { args } => commands::couple(&args),
        Command::Scenarios => commands::scenarios(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

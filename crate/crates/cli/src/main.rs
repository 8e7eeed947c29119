use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use statarb_core::config::RunConfig;
use statarb_core::diagnose::{diagnose_config, verification_for};
use statarb_core::output::{output_dir, write_run, Manifest};
use statarb_core::simharness::{run_campaign, Family};

/// Worker-thread count for the parallel path loop.
const THREADS_ENV: &str = "STATARB_THREADS";

#[derive(Parser)]
#[command(name = "statarb", version, about = "Statistical-arbitrage strategies on OU residuals: Monte Carlo campaigns and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write CSV/JSON artifacts.
    Simulate(SimulateArgs),
    /// Print the optimality-condition scan and parameter conditioning.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Exp,
    Mv,
    MvDollar,
    MvTcost,
    All,
}

impl StrategyArg {
    fn family(self) -> Option<Family> {
        match self {
            StrategyArg::Exp => Some(Family::Exp),
            StrategyArg::Mv => Some(Family::Mv),
            StrategyArg::MvDollar => Some(Family::MvDollar),
            StrategyArg::MvTcost => Some(Family::MvTcost),
            StrategyArg::All => None,
        }
    }
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    strategy: StrategyArg,
    /// Number of Monte Carlo paths (overrides the config).
    #[arg(long)]
    paths: Option<usize>,
    /// Path seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Subtract transaction costs from the cost strategy's wealth.
    #[arg(long, value_name = "true|false")]
    debit_costs: Option<bool>,
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring worker threads")?;
    #[cfg(not(feature = "parallel"))]
    if n > 1 {
        warn!("{THREADS_ENV}={n} ignored: built without the parallel feature");
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(paths) = args.paths {
        cfg.paths = paths;
    }
    if let Some(d) = args.debit_costs {
        cfg.debit_costs = d;
    }
    let out = output_dir(args.out.as_deref(), &cfg)?;
    let filter = args.strategy.family();

    let started = Instant::now();
    let campaign = cfg.build_campaign(filter)?;
    info!(
        "{} assets, {} paths, {} steps, {} strategy cells",
        campaign.ou.dim(),
        campaign.paths,
        campaign.steps,
        campaign.cells.len()
    );

    let mut manifest = Manifest::new(cfg.echo()?, filter);
    manifest
        .versions
        .insert(env!("CARGO_PKG_NAME").to_string(), env!("CARGO_PKG_VERSION").to_string());
    if campaign.cells.iter().any(|c| c.family == Family::Exp) {
        let report = verification_for(&campaign.ou, &campaign.p, campaign.horizon, cfg.diagnostic_steps)
            .context("optimality-condition scan")?;
        if !report.satisfied() {
            warn!(
                "exponential-utility optimality conditions not met on [0, {}] (4·max‖Λ0‖ = {:.3e}, 32·max‖Λ1‖ = {:.3e}); the strategy is still simulated",
                campaign.horizon, report.max_4_lambda0, report.max_32_lambda1
            );
        }
        manifest.verification = Some(report);
    }

    let bundle = run_campaign(&campaign)?;
    let files = write_run(&out, &bundle, cfg.paths_limit, manifest)?;
    info!("wrote {} files to {} in {:.1?}", files.len(), out.display(), started.elapsed());
    for cell in &bundle.cells {
        println!(
            "{:<40} mean {:>12.4} sd {:>12.4}",
            cell.spec.slug(),
            cell.stats.mean,
            cell.stats.sd
        );
    }
    Ok(())
}

fn diagnose(config: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    if cfg.diagnostic_steps < 2 {
        bail!("diagnostic_steps must be at least 2");
    }
    let report = diagnose_config(&cfg)?;
    println!("{report}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Diagnose { config } => diagnose(&config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

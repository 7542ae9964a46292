use clap::{Parser, Subcommand};
use hugevar_cli::config::{RunConfig, DEFAULT_SEED};
use hugevar_cli::output::OutDir;
use hugevar_cli::{bench, commands, CliError, Result};
use std::path::PathBuf;
use std::process::ExitCode;

/// Bayesian VARs with factor stochastic volatility for very large systems.
#[derive(Debug, Parser)]
#[command(name = "hugevar", version)]
struct Cli {
    /// TOML run configuration; every section is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread cap; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulation study over scenario grids.
    Simulate {
        /// Comma-separated scenarios (sparse, intermediate, dense).
        #[arg(long, value_delimiter = ',')]
        scenario: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long = "T", value_delimiter = ',')]
        t: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
        /// Comma-separated estimator tags, e.g. DL1K,OLS.
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<String>>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        burnin: Option<usize>,
    },
    /// Estimate one model on a data panel.
    Fit,
    /// Expanding-window density forecast comparison.
    Forecast,
    /// Time sweeps and fit scaling exponents.
    Bench {
        /// Timed sweeps per grid point.
        #[arg(long)]
        sweeps: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot size thread pool: {e}")))?;
    }
    let out_path = cli.out.clone().or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from("hugevar-out"));
    let need = |what: &str| CliError::config(format!("{what} needs a [{what}] section in --config"));

    match cli.command {
        Command::Simulate { scenario, m, t, reps, estimators, draws, burnin } => {
            let mut s = cfg.simulate.clone().unwrap_or_default();
            s.scenarios = scenario.unwrap_or(s.scenarios);
            s.m_list = m.unwrap_or(s.m_list);
            s.t_list = t.unwrap_or(s.t_list);
            s.reps = reps.unwrap_or(s.reps);
            s.estimators = estimators.unwrap_or(s.estimators);
            s.chain.draws = draws.unwrap_or(s.chain.draws);
            s.chain.burnin = burnin.unwrap_or(s.chain.burnin);
            s.grid()?;
            commands::simulate(&s, seed, &mut OutDir::create(&out_path)?)?;
        }
        Command::Fit => {
            let s = cfg.fit.as_ref().ok_or_else(|| need("fit"))?;
            commands::fit(s, seed, &mut OutDir::create(&out_path)?)?;
        }
        Command::Forecast => {
            let s = cfg.forecast.as_ref().ok_or_else(|| need("forecast"))?;
            commands::forecast(s, seed, &mut OutDir::create(&out_path)?)?;
        }
        Command::Bench { sweeps } => {
            let mut b = cfg.bench.clone().unwrap_or_default();
            b.sweeps = sweeps.unwrap_or(b.sweeps);
            b.validate()?;
            let report = bench::run(&b, seed)?;
            for v in &report.verdicts {
                let verdict = match v.pass() {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "info",
                };
                println!("{:<24} {:>8.3}  {verdict}", v.quantity, v.estimate);
            }
            bench::write(&report, &b, seed, &mut OutDir::create(&out_path)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hugevar: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Command-line front end for the `marketmode` pipeline.

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use marketmode::TieBreak;

pub mod chart;
pub mod commands;
pub mod config;
pub mod formats;
pub mod manifest;

pub use commands::Scopes;
pub use config::RunConfig;

pub const LONG_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (file formats v1)");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config or inputs. Exit code 2.
    #[error("usage error: {0}")]
    Usage(String),
    /// Anything that failed while running. Exit code 1.
    #[error("{0:#}")]
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Runtime(err)
    }
}

impl From<marketmode::Error> for CliError {
    fn from(err: marketmode::Error) -> Self {
        CliError::Runtime(err.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "marketmode", version, long_version = LONG_VERSION, about = "Rolling correlation spectra and portfolio-diversification sampling for daily price panels")]
pub struct Cli {
    /// TOML config file (defaults to $MARKETMODE_CONFIG when set).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory holding all stage outputs.
    #[arg(long, short = 'r', global = true)]
    pub run_dir: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and align prices, assign deciles, write the panel and drop report.
    Ingest {
        /// `date,ticker,close` table.
        #[arg(long)]
        prices: Option<PathBuf>,
        /// `ticker,decile` table or a ticker list ordered by market cap.
        #[arg(long)]
        deciles: Option<PathBuf>,
        /// First calendar day (YYYY-MM-DD).
        #[arg(long)]
        start: Option<NaiveDate>,
        /// Last calendar day (YYYY-MM-DD).
        #[arg(long)]
        end: Option<NaiveDate>,
    },
    /// Rolling normalized leading eigenvalue and uniformity per scope.
    Spectra {
        #[arg(long, value_enum, default_value = "both")]
        scopes: Scopes,
        /// Rolling window length in days.
        #[arg(long)]
        window: Option<usize>,
        /// Also write SVG line charts.
        #[arg(long)]
        charts: bool,
    },
    /// Portfolio-sampling experiment: mu table, median trajectories, greedy path.
    Sample {
        /// Rolling window length in days.
        #[arg(long)]
        window: Option<usize>,
        /// Random portfolios per (m,n).
        #[arg(long)]
        draws: Option<usize>,
        /// Master seed for all draws.
        #[arg(long)]
        seed: Option<u64>,
        /// Largest m in the grid (0 = all sectors).
        #[arg(long)]
        max_sectors: Option<usize>,
        /// Largest n in the grid (0 = full sector size).
        #[arg(long)]
        max_per_sector: Option<usize>,
        /// Greedy path stops unless a move lowers mu by more than this.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Greedy tie rule: per_sector (n) or sectors (m).
        #[arg(long, value_parser = parse_tie_break)]
        tie_break: Option<TieBreak>,
    },
    /// Average-linkage clustering of median trajectories.
    Cluster {
        /// Trajectory table (defaults to the run's sample output).
        #[arg(long)]
        trajectories: Option<PathBuf>,
        /// Number of flat clusters.
        #[arg(long, short = 'k', value_parser = clap::value_parser!(u64).range(1..))]
        k: Option<u64>,
    },
    /// Verify stage outputs and write report.md and manifest.json.
    Report,
}

fn parse_tie_break(s: &str) -> Result<TieBreak, String> {
    match s {
        "per_sector" | "n" => Ok(TieBreak::PerSector),
        "sectors" | "m" => Ok(TieBreak::Sectors),
        other => Err(format!("unknown tie rule `{other}` (use per_sector or sectors)")),
    }
}

/// Applies flag overrides to the loaded config.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut c = RunConfig::load(cli.config.as_deref())?;
    if let Some(d) = &cli.run_dir {
        c.paths.run_dir = d.clone();
    }
    if let Some(w) = cli.workers {
        c.workers = w;
    }
    match &cli.command {
        Command::Ingest { prices, deciles, start, end } => {
            c.paths.prices = prices.clone().or(c.paths.prices);
            c.paths.deciles = deciles.clone().or(c.paths.deciles);
            c.analysis.start = start.or(c.analysis.start);
            c.analysis.end = end.or(c.analysis.end);
        }
        Command::Spectra { window, charts, .. } => {
            c.analysis.window = window.unwrap_or(c.analysis.window);
            c.charts |= charts;
        }
        Command::Sample { window, draws, seed, max_sectors, max_per_sector, epsilon, tie_break } => {
            c.analysis.window = window.unwrap_or(c.analysis.window);
            c.analysis.draws = draws.unwrap_or(c.analysis.draws);
            c.analysis.master_seed = seed.unwrap_or(c.analysis.master_seed);
            c.max_sectors = max_sectors.unwrap_or(c.max_sectors);
            c.max_per_sector = max_per_sector.unwrap_or(c.max_per_sector);
            c.epsilon = epsilon.unwrap_or(c.epsilon);
            c.tie_break = tie_break.unwrap_or(c.tie_break);
        }
        Command::Cluster { k, .. } => {
            if let Some(k) = k {
                c.clusters = *k as usize;
            }
        }
        Command::Report => {}
    }
    Ok(c)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = resolve_config(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Runtime(e.into()))?;
    pool.install(|| match &cli.command {
        Command::Ingest { .. } => commands::ingest(&config).map(drop),
        Command::Spectra { scopes, .. } => commands::spectra(&config, *scopes).map(drop),
        Command::Sample { .. } => commands::sample(&config).map(drop),
        Command::Cluster { trajectories, .. } => commands::cluster(&config, trajectories.as_deref()).map(drop),
        Command::Report => commands::report(&config).map(drop),
    })
}

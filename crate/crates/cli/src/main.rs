mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use leanopt::refdata::ProblemType;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "leanopt", version, about = "Formulate, solve and grade optimization models")]
pub struct Cli {
    /// TOML config file; LEAN_OPT_* environment variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Directory for every file the command writes.
    #[arg(long, global = true, default_value = "leanopt-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// Scripted replies (JSON array); overrides backend.transcript.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Classify a query into a problem type.
    Classify {
        query: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Generate a model from a query and a directory of CSV files.
    Formulate {
        query: PathBuf,
        data: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        /// Skip classification.
        #[arg(long, value_parser = parse_ptype)]
        force_type: Option<ProblemType>,
        /// Use the type-agnostic plan workflow.
        #[arg(long)]
        agnostic: bool,
    },
    /// Solve a model file: LP format for `.lp`, the sectioned model text otherwise.
    Solve {
        lp: PathBuf,
        /// Exit 0 when the model is infeasible or unbounded.
        #[arg(long)]
        allow_infeasible: bool,
    },
    /// Run and grade a benchmark directory.
    Evaluate {
        benchmark: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        repetitions: u64,
        /// Worker threads for parallel runs.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        threads: Option<u64>,
        #[arg(long)]
        sequential: bool,
    },
    /// Impute synthetic parameters.
    #[command(subcommand)]
    Datagen(DatagenCmd),
    /// Build airline sales and network-planning models.
    #[command(subcommand)]
    Sblp(SblpCmd),
}

#[derive(Debug, Subcommand)]
pub enum DatagenCmd {
    /// Demand and initial inventory from a sales table.
    Nrm {
        sales: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Distance-based transport costs between locations.
    Tp {
        locations: PathBuf,
        #[arg(long = "cost-per-mile", required = true, num_args = 1..)]
        cost_per_mile: Vec<f64>,
        /// Region demand table; rows without a matching customer are dropped.
        #[arg(long)]
        demand: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Facility setup costs.
    Flp {
        facilities: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        min: i64,
        #[arg(long, default_value_t = 50_000)]
        max: i64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct SblpArgs {
    /// Directory with flight.csv, od_demand.csv, v1.csv and v2.csv.
    pub dir: PathBuf,
    /// Seats consumed per sale, as FARE=VALUE.
    #[arg(long, value_parser = parse_pair)]
    pub consumption: Vec<(String, f64)>,
    /// Restrict to a flight, as "A-B 06:25"; repeatable.
    #[arg(long = "flight")]
    pub flights: Vec<String>,
    /// v2.csv holds w/v ratios instead of absolute values.
    #[arg(long)]
    pub ratio: bool,
    /// Capacity for flights without a capacity column.
    #[arg(long)]
    pub default_capacity: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum SblpCmd {
    /// Sales-based LP over the offered options.
    Build {
        #[command(flatten)]
        args: SblpArgs,
    },
    /// Pick at most Z flights.
    Plan {
        #[command(flatten)]
        args: SblpArgs,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        z: u64,
        /// Fixed linking constant instead of the automatic bound.
        #[arg(long)]
        big_m: Option<f64>,
    },
}

fn parse_ptype(s: &str) -> Result<ProblemType, String> {
    s.parse().map_err(|e: leanopt::refdata::UnknownProblemType| e.to_string())
}

fn parse_pair(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected FARE=VALUE, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("not a number: {v:?}"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("consumption must be positive, got {v}"));
    }
    Ok((k.trim().to_string(), v))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let env = |k: &str| std::env::var(k).ok();
    match commands::run(&cli, &env) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report(cli.json);
            ExitCode::from(f.code())
        }
    }
}

//! `topsrec`: cross-validation, grid search and sweeps for the formation-top
//! recommender, written as a directory of CSV reports plus `manifest.json`.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "topsrec", version, about)]
struct Cli {
    /// Worker threads for fold, grid and sweep cells [default: all cores].
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recommender k-fold cross-validation.
    Cv(CvArgs),
    /// Spline baseline under the same fold plan.
    SplineCv(SplineArgs),
    /// Exhaustive hyperparameter grid search.
    Grid(GridArgs),
    /// Test error against training fraction.
    Sweep(SweepArgs),
    /// Writes the fold plan.
    DumpPlan(PlanOnlyArgs),
    /// Fits on every pick and writes factors and the completed depth matrix.
    DumpModel(ModelOnlyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Well header CSV (well_id,datum_elev_m,ground_elev_m,x_m,y_m).
    #[arg(long)]
    pub wells: PathBuf,
    /// Picks CSV (well_id,top_id,md_m).
    #[arg(long)]
    pub picks: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "TOPSREC_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlanArgs {
    #[arg(long, default_value_t = topsrec_core::validation::DEFAULT_FOLDS, value_parser = at_least_two)]
    pub folds: usize,
    /// Spatially blocked folds instead of random ones.
    #[arg(long)]
    pub spatial: bool,
    /// Block side in meters [default: shorter extent / 4].
    #[arg(long, requires = "spatial")]
    pub block_size: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 2)]
    pub factors: usize,
    #[arg(long, default_value_t = 290)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SplineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long, default_value_t = topsrec_core::spline::DEFAULT_DAMPING)]
    pub damping: f64,
    /// Recommender per_top.csv to difference against.
    #[arg(long)]
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Comma-separated factor counts [default: 1..=10].
    #[arg(long = "grid-factors", value_delimiter = ',')]
    pub factors: Vec<usize>,
    /// Comma-separated iteration counts [default: 10,20,...,440].
    #[arg(long = "grid-iterations", value_delimiter = ',')]
    pub iterations: Vec<usize>,
    /// Comma-separated λ values [default: 0.001,0.01,0.1,1,10].
    #[arg(long = "grid-lambdas", value_delimiter = ',')]
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated training fractions [default: 0.01,0.1,...,0.9,0.99].
    #[arg(long, value_delimiter = ',')]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = topsrec_core::validation::DEFAULT_RESTARTS)]
    pub restarts: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlanOnlyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelOnlyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match &cli.command {
        Command::Cv(a) => commands::cv(a),
        Command::SplineCv(a) => commands::spline_cv(a),
        Command::Grid(a) => commands::grid(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::DumpPlan(a) => commands::dump_plan(a),
        Command::DumpModel(a) => commands::dump_model(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render_chain(&e));
            ExitCode::from(1)
        }
    }
}

fn at_least_two(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 2 => Ok(n),
        Ok(n) => Err(format!("need at least 2 folds, got {n}")),
        Err(e) => Err(e.to_string()),
    }
}

/// Joins the error chain, dropping causes already quoted by their parent.
fn render_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if out.contains(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
    }
    out
}

//! `mcde`: generate synthetic data, train estimators, run the ensemble on
//! scenes and benchmark everything under cross-validation.
//!
//! Exit status is 0 on success, 2 for usage errors and 1 for runtime errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcde_core::datagen::{Pool, Reflectance};
use mcde_core::ensemble::Variant;
use mcde_core::nnet::Arch;

#[derive(Parser, Debug)]
#[command(
    name = "mcde",
    version,
    about = "MC-dropout ensemble illuminant estimation"
)]
struct Cli {
    /// Worker threads for folds and MC passes. Does not change results.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labelled dataset.
    GenData(GenDataArgs),
    /// Train a stock architecture on a dataset.
    Train(TrainArgs),
    /// Run the ensemble on every scene of a dataset.
    Estimate(EstimateArgs),
    /// Cross-validated benchmark of all methods.
    Bench(BenchArgs),
}

fn parse_reflectance(s: &str) -> Result<Reflectance, String> {
    match s {
        "colored" => Ok(Reflectance::Colored),
        "grey" => Ok(Reflectance::Grey),
        other => Err(format!(
            "unknown reflectance `{other}` (expected colored or grey)"
        )),
    }
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file with generator settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// full, band-a, band-b or band-ab.
    #[arg(long)]
    pub pool: Option<Pool>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub patches: Option<usize>,
    /// Standard deviation of additive sensor noise.
    #[arg(long)]
    pub noise: Option<f64>,
    /// colored or grey.
    #[arg(long, value_parser = parse_reflectance)]
    pub reflectance: Option<Reflectance>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for the network, its card and the loss trace.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// g-net or m-net.
    #[arg(long)]
    pub arch: Option<Arch>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Train only on scenes whose label lies in this pool.
    #[arg(long)]
    pub train_pool: Option<Pool>,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Network container; repeat for an ensemble.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Output directory; records go to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Forward passes per model.
    #[arg(long)]
    pub nu: Option<usize>,
    /// linear or log.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Also write white-balanced scenes into `<out>/corrected`.
    #[arg(long, requires = "out")]
    pub corrected: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Dataset directory; the two-band scenario is generated when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scenes to generate when no dataset is given.
    #[arg(long)]
    pub scenes: Option<usize>,
    /// Number of folds.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub nu: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Bench(a) => commands::bench(a),
    };
    let result = match cli.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(run)),
        None => run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<commands::UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand};

use config::{parse_k_list, FileConfig, KList, Overrides, RunConfig};
use fusedpmf::factorization::Variant;

#[derive(Parser, Debug)]
#[command(name = "fusedpmf", version, about = "Fused probabilistic matrix factorization over review feedback")]
struct Cli {
    /// Flat TOML config; flags win over its keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed for splits, initialization and synthesis.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Model variant: mf, rhc, rv or rhcv.
    #[arg(long, global = true)]
    variant: Option<Variant>,
    /// Latent dimension, or a comma-separated list for a sweep.
    #[arg(long, global = true, value_name = "N[,N...]", value_parser = parse_k_list)]
    k: Option<KList>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse review and view logs into a dataset file.
    Ingest {
        /// Amazon-style JSON-lines reviews.
        #[arg(long)]
        reviews: PathBuf,
        /// `user \t item [\t timestamp]` view edges.
        #[arg(long)]
        views: Option<PathBuf>,
    },
    /// Write the R, H, D and V channels as triplet files.
    Features {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Fit on every review and write a checkpoint and trace.
    Train {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Repeated holdout evaluation.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Predict one rating from a checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long)]
        item: String,
    },
    /// Generate a synthetic corpus with planted factors.
    Synth {
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        items: Option<usize>,
        /// Rank of the planted factors.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        /// Correlation between planted and auxiliary factors.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        density: Option<f64>,
    },
}

/// Exit statuses.
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Diverged(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (code, e) = match failure {
                Failure::Usage(e) => (EXIT_USAGE, e),
                Failure::Data(e) => (EXIT_DATA, e),
                Failure::Diverged(e) => (EXIT_DIVERGED, e),
            };
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(Failure::Usage)?,
        None => FileConfig::default(),
    };
    let flags = Overrides { seed: cli.seed, variant: cli.variant, k: cli.k.map(KList::into_vec), out: cli.out };
    let mut rc = RunConfig::resolve(file, flags).map_err(Failure::Usage)?;

    match cli.command {
        Command::Ingest { reviews, views } => commands::ingest(&rc, &reviews, views.as_deref()),
        Command::Features { dataset } => commands::features(&rc, &dataset),
        Command::Train { dataset } => commands::train(&rc, &dataset),
        Command::Evaluate { dataset } => commands::evaluate(&rc, &dataset),
        Command::Predict { checkpoint, user, item } => commands::predict(&checkpoint, &user, &item),
        Command::Synth { users, items, rank, noise, rho, density } => {
            let s = &mut rc.synthetic;
            s.n_users = users.unwrap_or(s.n_users);
            s.n_items = items.unwrap_or(s.n_items);
            s.rank = rank.unwrap_or(s.rank);
            s.noise_std = noise.unwrap_or(s.noise_std);
            s.rho = rho.unwrap_or(s.rho);
            s.density = density.unwrap_or(s.density);
            commands::synth(&rc)
        }
    }
}

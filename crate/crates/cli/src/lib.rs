//! The `synacc` command line. Each subcommand reads a pool of classifier
//! records or embeddings and writes a JSON or CSV report.

pub mod commands;
pub mod manifest;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

pub use commands::{FrechetArgs, GradcheckArgs, PredictArgs, ScoreArgs, ToyArgs};
pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "synacc",
    version,
    about = "Predict test accuracy from accuracy on GAN samples"
)]
pub struct Cli {
    /// Base seed; every random component derives its own seed from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for per-model work (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Output file, or directory for toy-e2e. Reports go to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-model synthetic-accuracy predictions as CSV.
    Predict(PredictArgs),
    /// R^2, k-fold R^2, Kendall tau and CMI of the predictions.
    Score(ScoreArgs),
    /// Class-conditional Frechet distances between embedding sets.
    Frechet(FrechetArgs),
    /// Mixture data, conditional GAN, classifier pool, predictions and reports.
    #[command(name = "toy-e2e")]
    ToyE2e(ToyArgs),
    /// Finite-difference check of the MLP backward pass.
    Gradcheck(GradcheckArgs),
}

/// A failure of a numerical check rather than of the input.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

/// 2 if anything in the error chain is numerical, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let numerical = err.chain().any(|e| {
        e.downcast_ref::<NumericalFailure>().is_some()
            || e.downcast_ref::<synacc::Error>()
                .is_some_and(synacc::Error::is_numerical)
    });
    if numerical {
        EXIT_NUMERICAL
    } else {
        EXIT_INVALID
    }
}

/// The error chain on one line. Library errors already print their causes,
/// so a cause whose text ends the message so far is not repeated.
pub fn render_error(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for link in err.chain() {
        let msg = link.to_string();
        if out.ends_with(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
    }
    out
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()?;
    let g = commands::Global {
        seed: cli.seed,
        out: cli.out,
    };
    pool.install(|| match &cli.command {
        Command::Predict(a) => commands::predict::run(&g, a),
        Command::Score(a) => commands::score::run(&g, a),
        Command::Frechet(a) => commands::frechet::run(&g, a),
        Command::ToyE2e(a) => commands::toy::run(&g, a),
        Command::Gradcheck(a) => commands::gradcheck::run(&g, a),
    })
}

/// Parses `args`, runs, prints any error and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", render_error(&e));
            exit_code(&e)
        }
    }
}

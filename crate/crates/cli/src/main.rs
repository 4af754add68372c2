mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunArgs, UsageError};

/// Q&A labeling: simulate labels, verify the label models, train and
/// evaluate classifiers, tabulate bounds, and serve the annotation API.
#[derive(Debug, Parser)]
#[command(name = "qa-label", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate Q&A labeling of a dataset and write events.jsonl.
    Label(RunArgs),
    /// Run the label-model consistency checks.
    Verify(VerifyArgs),
    /// Train one model per repetition; writes metrics and parameters.
    Train(RunArgs),
    /// Evaluate saved parameters on held-out data.
    Eval(EvalArgs),
    /// Tabulate both estimation-error bounds over I = 1..K-1.
    Bounds(BoundsArgs),
    /// Serve the annotation API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Check only this number of classes (default: 2 through 6).
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub posteriors: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Relative error injected into the loss coefficient (negative control).
    #[arg(long, default_value_t = 0.0, hide = true)]
    pub inject_coefficient_fault: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Parameter file written by `train`.
    #[arg(long)]
    pub params: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long = "K", default_value_t = 10)]
    pub k: usize,
    /// Lipschitz coefficient of the rewritten loss.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Supremum of the base loss (2 for MAE).
    #[arg(long, default_value_t = 2.0)]
    pub c_l: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Training sample count.
    #[arg(long, default_value_t = 10_000)]
    pub n: u64,
    /// Sum over classes of the Rademacher complexities.
    #[arg(long, conflicts_with_all = ["kernel_r", "kernel_lambda"])]
    pub rad_sum: Option<f64>,
    /// Kernel radius r; with --kernel-lambda sets the complexity sum to K r Lambda / sqrt(n).
    #[arg(long, requires = "kernel_lambda")]
    pub kernel_r: Option<f64>,
    #[arg(long, requires = "kernel_r")]
    pub kernel_lambda: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Event store; defaults to <out>/events.jsonl.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Allowed browser origin; any origin when omitted.
    #[arg(long)]
    pub cors_origin: Option<String>,
    /// Comma-separated class display names.
    #[arg(long, value_delimiter = ',')]
    pub class_names: Option<Vec<String>>,
    /// Name the dataset is served under.
    #[arg(long, default_value = "default")]
    pub dataset_name: String,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Label(args) => commands::label(&args),
        Command::Verify(args) => commands::verify(&args),
        Command::Train(args) => commands::train(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Bounds(args) => commands::bounds(&args),
        Command::Serve(args) => commands::serve(&args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

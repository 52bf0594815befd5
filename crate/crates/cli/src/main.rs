use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// `println!` that stops quietly when stdout is closed, e.g. piped into `head`.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let mut out = std::io::stdout().lock();
        if let Err(e) = writeln!(out, $($arg)*) {
            if e.kind() != std::io::ErrorKind::BrokenPipe {
                panic!("writing to stdout: {e}");
            }
        }
    }};
}

mod commands;
mod config;

use commands::{AnalyzeOptions, CliError};

/// Environment variable that fixes the worker thread count.
const THREADS_ENV: &str = "PAULIPROP_THREADS";

#[derive(Parser)]
#[command(
    name = "pauliprop",
    version,
    about = "Sparse Pauli propagation for Trotterized spin-chain dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a key = value config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// OSE series, growth, histograms and bounds from operator snapshots.
    Analyze {
        /// A snapshot file or a directory of operator_step_*.txt snapshots.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1")]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        /// Target errors for the K prescription column of bounds.csv.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        /// Output directory, defaults to the input's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an invariant suite and print a JSON summary.
    Verify {
        /// algebra, oracle, unitarity, ose-properties, topk-error, tail-bound, xy-structure, scrambling or all.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Budget K needed for a target truncation error, given an OSE value.
    Bound {
        #[arg(long = "s", allow_negative_numbers = true)]
        entropy: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        alpha: f64,
        /// Also evaluate the tail bound at this K.
        #[arg(long)]
        k: Option<u64>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Input(format!("{THREADS_ENV}={raw:?} is not a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Simulate { config } => {
            let out = commands::simulate(&config)?;
            say!(
                "wrote {} records to {}",
                out.records,
                out.trajectory.display()
            );
            if out.snapshots > 0 {
                say!("wrote {} operator snapshots", out.snapshots);
            }
            if let Some(r) = out.reference {
                say!("wrote dense reference to {}", r.display());
            }
        }
        Command::Analyze {
            input,
            alpha,
            k,
            eps,
            out,
        } => {
            let opts = AnalyzeOptions {
                alphas: alpha,
                ks: k,
                epsilons: eps,
                out,
            };
            let res = commands::analyze(&input, &opts)?;
            say!("analysed {} snapshot(s)", res.snapshots);
            for f in res.files {
                say!("  {}", f.display());
            }
        }
        Command::Verify { suite, seed } => {
            let (summary, passed) = commands::verify(&suite, seed)?;
            say!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("serializable")
            );
            if !passed {
                return Err(CliError::VerifyFailed(suite));
            }
        }
        Command::Bound {
            entropy,
            eps,
            alpha,
            k,
        } => {
            let v = commands::bound(entropy, eps, alpha, k)?;
            say!(
                "{}",
                serde_json::to_string_pretty(&v).expect("serializable")
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

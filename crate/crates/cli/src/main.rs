use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod parse;
mod svg;

#[derive(Parser, Debug)]
#[command(name = "filippov", version, about = "Filippov systems: classification, orbits, metrics and transitivity")]
pub struct Cli {
    /// System description (JSON).
    #[arg(long, global = true, conflicts_with = "builtin")]
    pub config: Option<PathBuf>,
    /// Built-in system name instead of a config file.
    #[arg(long, global = true)]
    pub builtin: Option<String>,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 20.0)]
    pub horizon: f64,
    #[arg(long, global = true, default_value_t = 0.1)]
    pub eps: f64,
    /// Write every artifact into this directory instead of printing one.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Svg => "svg",
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Region report along the switching manifold.
    Classify {
        /// Number of sample points along the manifold.
        #[arg(long, default_value_t = 200)]
        grid: usize,
    },
    /// One orbit through a point: `x,y[:choice,...]`.
    Simulate {
        orbit: String,
        /// Sampling step of the CSV output.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Branch tree from a point.
    Branches {
        point: String,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 0.25)]
        dep_step: f64,
        #[arg(long)]
        backward: bool,
    },
    /// Distance between two orbits given as `x,y[:choice,...]`.
    Distance {
        a: String,
        b: String,
        #[arg(long, value_enum, default_value_t = Kind::Integral)]
        kind: Kind,
        #[arg(long, default_value_t = 1e-6)]
        rel_tol: f64,
    },
    /// Σ-sequence of an orbit on `[-tau, tau]`.
    SigmaSeq {
        orbit: String,
        #[arg(long, default_value_t = 5.0)]
        tau: f64,
    },
    /// Transitivity certificate over random seeds, with an optional glue.
    Transitivity {
        #[arg(long, default_value_t = 8)]
        seeds: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 0.25)]
        dep_step: f64,
        /// Also glue two random orbits at `--eps`.
        #[arg(long)]
        glue: bool,
    },
    /// Orbit following the past of `a` and the future of `b` within `--eps`.
    Glue {
        a: String,
        b: String,
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
    /// Iterated glue of random orbits and the targets it visits.
    Witness {
        #[arg(long, default_value_t = 4)]
        count: usize,
        /// Target grid points per axis.
        #[arg(long, default_value_t = 4)]
        targets: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Integral,
    Sup,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<filippov::Error>() {
        Some(e) => e.exit_code() as u8,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("FILIPPOV_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: FILIPPOV_THREADS must be a positive integer, got {n:?}");
                return ExitCode::from(2);
            }
        }
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

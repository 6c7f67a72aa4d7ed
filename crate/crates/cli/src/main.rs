//! `transop` command-line tool.
//!
//! Every subcommand takes `--seed`, `--config <file>` and `--out <path>`.
//! Without `--out` the result goes to standard output. Exit status is 0 on
//! success, 1 on a usage error and 2 when the computation itself fails.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "transop",
    version,
    about = "Learn and apply Lie-group transport operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random draw the command makes.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Flat `key = value` file overriding config defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file, written atomically. Standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Rotation,
    TwoClass,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long, value_enum, default_value = "rotation")]
        kind: Kind,
        /// Points (rotation) or points per class (two-class).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        angle_spread: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        /// Also write the rotated partner of every point as a pair file.
        #[arg(long)]
        pairs_out: Option<PathBuf>,
        /// Also write the ground-truth generators as a model file.
        #[arg(long)]
        model_out: Option<PathBuf>,
        /// Multiplier on the ground-truth generators written by `--model-out`.
        #[arg(long)]
        gain: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Draw one nearest-neighbor partner per point.
    Pair {
        #[arg(long)]
        data: PathBuf,
        /// Headerless feature CSV used for the neighbor search instead of the points.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Learn an operator dictionary from pairs.
    Train {
        /// Pair file (explicit coordinates or indices into `--data`).
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Number of operators.
        #[arg(long)]
        operators: Option<usize>,
        /// Per-step training log CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Infer sparse coefficients for pairs under a trained model.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "prox")]
        method: String,
        #[command(flatten)]
        common: Common,
    },
    /// Apply randomly sampled transformations to points.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Laplace scale shared by every operator.
        #[arg(long)]
        scale: Option<f64>,
        /// Per-point scales from a trained encoder instead of `--scale`.
        #[arg(long)]
        encoder: Option<PathBuf>,
        /// Standard deviation of additive Gaussian noise.
        #[arg(long)]
        noise: Option<f64>,
        /// Samples per input point.
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Infer each pair's transformation and walk along it.
    Paths {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Path multipliers; values above 1 extrapolate.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        t: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Per-operator stability metrics, and optionally a path trace.
    Stability {
        #[arg(long)]
        model: PathBuf,
        /// Operator to trace.
        #[arg(long, requires_all = ["point", "trace_out"])]
        trace: Option<usize>,
        /// Starting point of the trace.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        point: Vec<f64>,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a classifier on labeled points.
    Classifier {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train a coefficient-scale encoder.
    Encoder {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Per-epoch training log CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Mean encoded scale per class and operator.
    Spread {
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare inference methods pair by pair.
    Bench {
        /// Number of synthetic rotation pairs, ignored with `--pair-file`.
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "prox,subgrad")]
        methods: Vec<String>,
        /// Model to benchmark; the exact rotation generator when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        pair_file: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Write 0 in the wall-time column so the output is reproducible.
        #[arg(long)]
        no_timing: bool,
        #[command(flatten)]
        common: Common,
    },
}

/// How a command failed, which decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<transop::Error> for Failure {
    fn from(e: transop::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    use commands as c;
    match cli.command {
        Command::Synth {
            kind,
            n,
            radius,
            angle_spread,
            noise,
            pairs_out,
            model_out,
            gain,
            common,
        } => c::synth(
            &common,
            c::SynthArgs {
                kind,
                n,
                radius,
                angle_spread,
                noise,
                pairs_out,
                model_out,
                gain,
            },
        ),
        Command::Pair {
            data,
            features,
            k,
            common,
        } => c::pair(&common, &data, features.as_deref(), k),
        Command::Train {
            pairs,
            data,
            operators,
            log,
            common,
        } => c::train(&common, &pairs, data.as_deref(), operators, log.as_deref()),
        Command::Infer {
            model,
            pairs,
            data,
            method,
            common,
        } => c::infer(&common, &model, &pairs, data.as_deref(), &method),
        Command::Sample {
            model,
            data,
            scale,
            encoder,
            noise,
            count,
            common,
        } => c::sample(
            &common,
            &model,
            &data,
            scale,
            encoder.as_deref(),
            noise,
            count,
        ),
        Command::Paths {
            model,
            pairs,
            data,
            t,
            common,
        } => c::paths(&common, &model, &pairs, data.as_deref(), t),
        Command::Stability {
            model,
            trace,
            point,
            trace_out,
            samples,
            common,
        } => c::stability(
            &common,
            &model,
            trace,
            &point,
            trace_out.as_deref(),
            samples,
        ),
        Command::Classifier { data, common } => c::classifier(&common, &data),
        Command::Encoder {
            model,
            classifier,
            data,
            log,
            common,
        } => c::encoder(&common, &model, &classifier, &data, log.as_deref()),
        Command::Spread {
            encoder,
            data,
            common,
        } => c::spread(&common, &encoder, &data),
        Command::Bench {
            pairs,
            methods,
            model,
            pair_file,
            data,
            no_timing,
            common,
        } => c::bench(
            &common,
            c::BenchArgs {
                pairs,
                methods,
                model,
                pair_file,
                data,
                timing: !no_timing,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("transop: usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("transop: error: {msg}");
            ExitCode::from(2)
        }
    }
}

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use pc_resolve::integrators::Scheme;
use pc_resolve::losses::LossWeights;
use pc_resolve::stencils::DerivativeMode;
use pc_resolve_cli::*;

#[derive(Parser)]
#[command(
    name = "pc-resolve",
    about = "Physics-consistent super-resolution toolkit for transient PDE simulations",
    version
)]
struct Cli {
    /// Worker threads (default: available cores). The PC_RESOLVE_THREADS
    /// environment variable takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a paired coarse/fine dataset from a JSON config.
    Generate {
        /// Path to the JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `out`; default "dataset").
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate losses and metrics over a dataset split; writes one CSV.
    Evaluate {
        /// Path to manifest.json.
        #[arg(long)]
        manifest: PathBuf,
        /// Split to evaluate: train | val | test | all.
        #[arg(long, default_value = "test")]
        split: String,
        /// Time integrator for the physics losses: bdf2 | cn | ee.
        #[arg(long, default_value = "bdf2")]
        scheme: String,
        /// Prediction source: gt | bicubic.
        #[arg(long, default_value = "bicubic")]
        source: String,
        /// Derivative mode: standard-fd | calibrated-64.
        #[arg(long, default_value = "standard-fd")]
        mode: String,
        /// Pixel-loss weight (default: per-problem reference value).
        #[arg(long)]
        w1: Option<f64>,
        /// Physics-inner weight.
        #[arg(long)]
        w4: Option<f64>,
        /// Physics-boundary weight.
        #[arg(long)]
        w5: Option<f64>,
        /// Output CSV path.
        #[arg(long, default_value = "evaluation.csv")]
        out: PathBuf,
    },
    /// Variational super-resolution of coarse frames; writes CSV + PGM.
    Superres {
        /// Path to manifest.json.
        #[arg(long)]
        manifest: PathBuf,
        /// Split to draw frames from.
        #[arg(long, default_value = "test")]
        split: String,
        /// Maximum number of frames to reconstruct.
        #[arg(long, default_value_t = 1)]
        limit: usize,
        /// Output directory.
        #[arg(long, default_value = "superres")]
        out: PathBuf,
        /// Also score the bicubic baseline per frame.
        #[arg(long)]
        baseline: bool,
        /// Optimizer iteration cap (default 2000).
        #[arg(long)]
        iters: Option<usize>,
        /// Time integrator for the physics term: bdf2 | cn | ee.
        #[arg(long, default_value = "bdf2")]
        scheme: String,
    },
    /// Solver-restart experiment on one dataset entry; writes CSV + PGM.
    Restart {
        /// Dataset directory (holding manifest.json and config.json).
        #[arg(long)]
        dataset: PathBuf,
        /// Entry id to restart from.
        #[arg(long, default_value_t = 0)]
        entry: u32,
        /// Warmup steps before the restart (default: min(150, 60% of steps)).
        #[arg(long)]
        warmup: Option<usize>,
        /// Continuation steps after the restart (default: min(100, what fits)).
        #[arg(long = "continue")]
        n_continue: Option<usize>,
        /// Also run the oracle restart (inject true fine frames).
        #[arg(long)]
        oracle: bool,
        /// Output directory.
        #[arg(long, default_value = "restart")]
        out: PathBuf,
        /// Optimizer iteration cap for the variational method.
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Print the consistency-order slope of a time integrator.
    Analyze {
        /// Scheme to analyze: bdf2 | cn | ee.
        #[arg(long, default_value = "bdf2")]
        scheme: String,
        /// Spatial-operator error scale in the consistency relation.
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        delta: f64,
    },
}

fn parse_or_exit<T>(r: Result<T, pc_resolve::Error>) -> T {
    match r {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(EXIT_CONFIG);
        }
    }
}

fn main() {
    let cli = Cli::parse();
    init_threads(cli.threads);
    let code = match cli.command {
        Command::Generate { config, out } => cmd_generate(&config, out.as_deref()),
        Command::Evaluate {
            manifest,
            split,
            scheme,
            source,
            mode,
            w1,
            w4,
            w5,
            out,
        } => {
            let scheme = parse_or_exit(Scheme::parse(&scheme));
            let mode = parse_or_exit(DerivativeMode::parse(&mode));
            let source = match EvalSource::parse(&source) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    std::process::exit(EXIT_CONFIG);
                }
            };
            let weights = if w1.is_some() || w4.is_some() || w5.is_some() {
                let mut w = LossWeights::allen_cahn();
                if let Some(v) = w1 {
                    w.w1 = v;
                }
                if let Some(v) = w4 {
                    w.w4 = v;
                }
                if let Some(v) = w5 {
                    w.w5 = v;
                }
                Some(w)
            } else {
                None
            };
            cmd_evaluate(&EvaluateArgs {
                manifest_path: &manifest,
                split: &split,
                scheme,
                source,
                mode,
                weights,
                out_csv: &out,
            })
        }
        Command::Superres {
            manifest,
            split,
            limit,
            out,
            baseline,
            iters,
            scheme,
        } => {
            let scheme = parse_or_exit(Scheme::parse(&scheme));
            cmd_superres(&SuperresArgs {
                manifest_path: &manifest,
                split: &split,
                limit,
                out_dir: &out,
                baseline,
                max_iters: iters,
                scheme,
            })
        }
        Command::Restart {
            dataset,
            entry,
            warmup,
            n_continue,
            oracle,
            out,
            iters,
        } => cmd_restart(&RestartArgs {
            dataset_dir: &dataset,
            entry,
            warmup,
            n_continue,
            include_oracle: oracle,
            out_dir: &out,
            max_iters: iters,
        }),
        Command::Analyze { scheme, delta } => {
            let scheme = parse_or_exit(Scheme::parse(&scheme));
            cmd_analyze(scheme, delta)
        }
    };
    std::process::exit(code);
}

//! `gut`: stage-per-command pipeline for construct unification.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gut_core::objective::PurityKind;

mod config;
mod error;
mod manifest;
mod stages;

use config::{GlobalFlags, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gut", version, about = "Learned construct similarity, clustering and parsimony/purity selection")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for generation, splitting, training and clustering.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Output directory for artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted clusters.
    Synth(SynthArgs),
    /// Train the contrastive projection.
    Train(TrainArgs),
    /// Compute the pairwise similarity matrix.
    Similarity(SimilarityArgs),
    /// Cluster over the candidate grid.
    Candidates,
    /// Select a candidate per alpha for both purity kinds.
    Sweep(SweepArgs),
    /// Score the model and the selected partition against gold labels.
    Evaluate(EvaluateArgs),
    /// Serve the sweep artifact over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    distractor_dim: Option<usize>,
    /// Number of relations (defaults to n).
    #[arg(long)]
    relations: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    output_dim: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Skip the grid search even if the config defines one.
    #[arg(long)]
    no_grid: bool,
}

#[derive(Debug, Args)]
struct SimilarityArgs {
    /// Use the pretrained embeddings instead of the trained projection.
    #[arg(long)]
    raw: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    alpha_step: Option<f64>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Alpha at which the evaluated partition is selected.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_parser = parse_purity)]
    purity: Option<PurityKind>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Sweep artifact (defaults to OUT/sweep.json).
    #[arg(long, value_name = "PATH")]
    artifact: Option<PathBuf>,
    #[arg(long, value_name = "HOST:PORT")]
    addr: Option<SocketAddr>,
    #[arg(long, value_name = "ORIGIN")]
    allow_origin: Option<String>,
    #[arg(long, value_name = "DIR")]
    ui_dir: Option<PathBuf>,
}

fn parse_purity(s: &str) -> Result<PurityKind, String> {
    s.parse().map_err(|e: gut_core::Error| e.to_string())
}

fn apply(cfg: &mut RunConfig, command: &Command) {
    fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
        if let Some(v) = value {
            *slot = v.clone();
        }
    }
    match command {
        Command::Synth(a) => {
            set(&mut cfg.synth.n, &a.n);
            set(&mut cfg.synth.clusters, &a.clusters);
            set(&mut cfg.synth.dim, &a.dim);
            set(&mut cfg.synth.noise, &a.noise);
            set(&mut cfg.synth.distractor_dim, &a.distractor_dim);
            if a.relations.is_some() {
                cfg.synth.relations = a.relations;
            }
        }
        Command::Train(a) => {
            let base = &mut cfg.train.base;
            set(&mut base.epochs, &a.epochs);
            set(&mut base.output_dim, &a.output_dim);
            set(&mut base.margin, &a.margin);
            set(&mut base.delta, &a.delta);
            if a.no_grid {
                cfg.train.grid = None;
            }
        }
        Command::Sweep(a) => set(&mut cfg.alpha_step, &a.alpha_step),
        Command::Evaluate(a) => {
            set(&mut cfg.eval_alpha, &a.alpha);
            set(&mut cfg.eval_purity, &a.purity);
        }
        Command::Serve(a) => {
            set(&mut cfg.serve.artifact, &a.artifact);
            set(&mut cfg.serve.addr, &a.addr);
            if a.allow_origin.is_some() {
                cfg.serve.allow_origin = a.allow_origin.clone();
            }
            if a.ui_dir.is_some() {
                cfg.serve.ui_dir = a.ui_dir.clone();
            }
        }
        Command::Similarity(_) | Command::Candidates => {}
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let flags = GlobalFlags {
        config: cli.global.config,
        seed: cli.global.seed,
        jobs: cli.global.jobs,
        out: cli.global.out,
    };
    let mut cfg = config::resolve(&flags)?;
    apply(&mut cfg, &cli.command);
    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Synth(_) => stages::synth(&cfg),
        Command::Train(_) => stages::train(&cfg),
        Command::Similarity(a) => stages::similarity(&cfg, a.raw),
        Command::Candidates => stages::candidates(&cfg),
        Command::Sweep(_) => stages::sweep(&cfg),
        Command::Evaluate(_) => stages::evaluate(&cfg),
        Command::Serve(_) => stages::serve(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

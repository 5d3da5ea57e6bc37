//! Command-line entry point: data preparation, training, prediction and evaluation.

mod config;
mod data;
mod error;
mod infer;
mod io;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Resolver;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "retromix", version, about = "Single-step retrosynthesis with latent-mixture Transformers")]
struct Cli {
    /// key=value settings file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Threads for data-parallel sections (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only errors on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Canonical SMILES for each stdin line.
    Canonicalize,
    /// Space-separated SMILES tokens for each stdin line.
    Tokenize(TokenizeArgs),
    /// Build a reaction-aware pre-training corpus from a molecule list.
    Augment(AugmentArgs),
    /// Extract the radius-1 template store of a mapped reaction file.
    Templates(TemplatesArgs),
    /// Split a reaction file into train and test sets.
    Split(SplitArgs),
    /// Train a model on an auxiliary corpus.
    Pretrain(TrainArgs),
    /// Train (or fine-tune) a model on reaction data.
    Train(TrainArgs),
    /// Predict ranked reactant sets for each product.
    Predict(PredictArgs),
    /// Score a prediction file against gold reactions.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct TokenizeArgs {
    /// Join space-separated tokens back into SMILES instead.
    #[arg(long)]
    pub detokenize: bool,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    /// Molecules, one SMILES per line (an optional leading id column is ignored).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output reaction-record file.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// random | template
    #[arg(long)]
    pub method: Option<String>,
    /// Maximum examples per molecule.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Template store (required for --method template).
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Extra random-traversal product strings per example.
    #[arg(long)]
    pub smiles_aug: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TemplatesArgs {
    /// Atom-mapped reaction records.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory receiving train.tsv and test.tsv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// random | template_disjoint
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Also write test_rare.tsv: test reactions whose template occurs at most this
    /// many times in the input.
    #[arg(long)]
    pub rare_threshold: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training reaction records.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Validation reaction records.
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Directory receiving checkpoints, metrics.tsv and model.ckpt.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Checkpoint to start from; its architecture and vocabulary are kept.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Comma-separated record files whose tokens make up the vocabulary
    /// (default: the training and validation files).
    #[arg(long, value_delimiter = ',')]
    pub vocab_corpus: Option<Vec<PathBuf>>,
    /// desk | toy | tiny
    #[arg(long)]
    pub preset: Option<String>,
    /// Number of latent classes.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub n_heads: Option<usize>,
    #[arg(long)]
    pub n_enc_layers: Option<usize>,
    #[arg(long)]
    pub n_dec_layers: Option<usize>,
    #[arg(long)]
    pub d_ff: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Peak learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Warmup steps of the inverse-square-root schedule (0: constant rate).
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Gradient-norm bound (0: off).
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub eval_interval: Option<usize>,
    /// Steps between intermediate checkpoints (0: final only).
    #[arg(long)]
    pub checkpoint_interval: Option<usize>,
    /// Stop once validation NLL per token reaches this value.
    #[arg(long)]
    pub target_val_nll: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Reaction records whose products are decoded.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Prediction file; `.stats` and `.latent` companions are written next to it.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Merged predictions per product.
    #[arg(long)]
    pub k: Option<usize>,
    /// Beam width per latent class (raised to k when smaller).
    #[arg(long)]
    pub beam_width: Option<usize>,
    /// Token budget per hypothesis.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Length-normalization exponent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Per-class predictions kept in the `.latent` file.
    #[arg(long)]
    pub latent_top: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Gold reaction records.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Writes PREFIX.txt, PREFIX.tsv and (with latent data) PREFIX.matrix.csv.
    #[arg(long)]
    pub output_prefix: Option<PathBuf>,
    /// Labeled, atom-mapped reactions for the template-proxy classifier.
    #[arg(long)]
    pub classifier_train: Option<PathBuf>,
    /// Prediction statistics (default: PREDICTIONS.stats when present).
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Per-class predictions (default: PREDICTIONS.latent when present).
    #[arg(long)]
    pub latent: Option<PathBuf>,
    /// Cutoff for the unique-class count.
    #[arg(long)]
    pub unique_k: Option<usize>,
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = if quiet {
        log::LevelFilter::Error
    } else {
        match verbose {
            0 => log::LevelFilter::Info,
            1 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    // Built explicitly so no environment variable is consulted.
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let mut cfg = Resolver::load(cli.config.as_deref())?;
    let workers = cfg.optional("workers", cli.workers)?;
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Canonicalize => {
            cfg.finish()?;
            data::canonicalize()
        }
        Command::Tokenize(a) => {
            cfg.finish()?;
            data::tokenize(a.detokenize)
        }
        Command::Augment(a) => data::augment(a, cfg),
        Command::Templates(a) => data::templates(a, cfg),
        Command::Split(a) => data::split(a, cfg),
        Command::Pretrain(a) => run::train(a, cfg, retromix::training::Phase::Pretrain),
        Command::Train(a) => run::train(a, cfg, retromix::training::Phase::Finetune),
        Command::Predict(a) => infer::predict(a, cfg),
        Command::Eval(a) => infer::eval(a, cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

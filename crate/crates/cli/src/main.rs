use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use vitatt_cli::commands;
use vitatt_cli::config::RunConfig;
use vitatt_core::data::SubsetMode;
use vitatt_core::project::TsneConfig;

/// Multi-modal image+metadata classifier: synthetic data, training,
/// evaluation, relevancy maps, and latent-space projection.
#[derive(Parser)]
#[command(name = "vitatt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TrainArgs {
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    /// Train without metadata or fusion (image-only ablation).
    #[arg(long)]
    image_only: bool,
    /// Metadata subset: all, HC-k, or LC-k.
    #[arg(long)]
    metadata_subset: Option<SubsetMode>,
    /// Train this many times with consecutive seeds, reporting per-run and
    /// mean test metrics.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a spec file.
    Synth {
        /// Synthetic dataset spec JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model and keep the best-validation checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Saliency images and metadata relevancy for samples or class averages.
    Explain {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Comma-separated sample ids.
        #[arg(long, conflicts_with = "class_average")]
        ids: Option<String>,
        /// Average relevancy per (class, field) over the split.
        #[arg(long)]
        class_average: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// t-SNE projection of pre- and post-fusion class-token embeddings.
    Project {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        tsne_seed: u64,
    },
    /// Rank metadata fields by correlation with the diagnostic label.
    SelectMetadata {
        #[arg(long)]
        config: PathBuf,
        /// Subset to print: all, HC-k, or LC-k.
        #[arg(long, default_value = "all")]
        mode: SubsetMode,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    // Clap exits 2 on parse errors by itself; normalize usage problems to 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("usage");
            eprintln!("error: {}", first.strip_prefix("error: ").unwrap_or(first));
            std::process::exit(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            std::process::exit(0);
        }
    };
    if let Err(error) = run(cli) {
        eprintln!("error: {error}");
        std::process::exit(vitatt_cli::exit_code(&error));
    }
}

fn run(cli: Cli) -> Result<(), vitatt_core::Error> {
    match cli.command {
        Command::Synth { spec, out, seed } => commands::cmd_synth(&spec, &out, seed),
        Command::Train(args) => {
            let mut config = RunConfig::load(&args.config)?;
            if let Some(out) = args.out {
                config.out_dir = out;
            }
            if let Some(seed) = args.seed {
                config.train.seed = seed;
            }
            if let Some(epochs) = args.epochs {
                config.train.epochs = epochs;
            }
            if args.image_only {
                config.model.image_only = true;
            }
            if let Some(mode) = args.metadata_subset {
                config.metadata_subset = mode;
            }
            commands::cmd_train(&config, args.repeats)
        }
        Command::Eval {
            checkpoint,
            data,
            split,
            out,
        } => commands::cmd_eval(&checkpoint, &data, &split, &out),
        Command::Explain {
            checkpoint,
            data,
            split,
            ids,
            class_average,
            out,
        } => commands::cmd_explain(&checkpoint, &data, &split, ids.as_deref(), class_average, &out),
        Command::Project {
            checkpoint,
            data,
            split,
            out,
            perplexity,
            iters,
            tsne_seed,
        } => {
            let tsne = TsneConfig {
                perplexity,
                iters,
                seed: tsne_seed,
                ..TsneConfig::default()
            };
            commands::cmd_project(&checkpoint, &data, &split, &out, &tsne)
        }
        Command::SelectMetadata { config, mode, out } => {
            let config = RunConfig::load(&config)?;
            commands::cmd_select_metadata(&config, mode, &out)
        }
    }
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use c2w_cli::commands::{self, Dims, Metric};
use c2w_cli::config::{default_config_path, Overrides, RunConfig};
use c2w_cli::gradcheck::Corruption;

#[derive(Parser)]
#[command(name = "c2w", version, about = "Character-to-word embeddings: language modeling and POS tagging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML run configuration. Relative paths that do not exist are looked
    /// up in the directory named by C2W_CONFIG_DIR; without this flag,
    /// `<command>.toml` in that directory is used if present.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set d_cs=64` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of epochs.
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Override the training corpus.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Override the dev corpus.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Override the checkpoint path prefix.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl TrainArgs {
    fn load(&self, command: &str) -> Result<RunConfig> {
        let overrides = Overrides {
            set: self.set.clone(),
            seed: self.seed,
            max_epochs: self.max_epochs,
            train: self.train.clone(),
            dev: self.dev.clone(),
            checkpoint: self.checkpoint.clone(),
        };
        let path = self.config.clone().or_else(|| default_config_path(command));
        RunConfig::load(path.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a language model on a plain-text corpus (one sentence per line).
    TrainLm(TrainArgs),
    /// Train a tagger on a CoNLL-format corpus.
    TrainTagger(TrainArgs),
    /// Evaluate a checkpoint; prints the metric with two decimals.
    Eval {
        /// Checkpoint path prefix, as written by training.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Plain text for `ppl`, CoNLL for `acc`.
        #[arg(long)]
        corpus: PathBuf,
        /// `ppl` for a language model, `acc` for a tagger.
        #[arg(long, value_enum)]
        metric: Metric,
        /// Zero-based CoNLL word column.
        #[arg(long, default_value_t = c2w::corpus::CONLL_WORD_COL)]
        word_col: usize,
        /// Zero-based CoNLL tag column.
        #[arg(long, default_value_t = c2w::corpus::CONLL_TAG_COL)]
        tag_col: usize,
    },
    /// Tag plain-text sentences, writing `token<TAB>tag` lines.
    Tag {
        /// Tagger checkpoint path prefix.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Whitespace-tokenized text, one sentence per line.
        #[arg(long)]
        input: PathBuf,
        /// Output file (standard output if omitted).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Nearest in-vocabulary words by cosine similarity.
    Neighbors {
        /// Checkpoint path prefix (either model kind).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of neighbors per query.
        #[arg(long, short, default_value_t = 5)]
        k: usize,
        /// Query words; need not be in the vocabulary.
        #[arg(required = true)]
        words: Vec<String>,
    },
    /// Parameter counts in closed form and, given a checkpoint, by enumeration.
    Params {
        /// Also count the parameters stored in this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Word vocabulary size for the lookup table.
        #[arg(long, default_value_t = 80_000)]
        vocab_size: usize,
        /// Character vocabulary size.
        #[arg(long, default_value_t = 618)]
        num_chars: usize,
        /// Word vector size.
        #[arg(long, default_value_t = 50)]
        d: usize,
        /// Character vector size.
        #[arg(long, default_value_t = 50)]
        d_c: usize,
        /// Character LSTM state size.
        #[arg(long, default_value_t = 150)]
        d_cs: usize,
    },
    /// Finite-difference gradient check of tiny language-model and tagger
    /// configurations; fails if any parameter group exceeds 1e-4.
    Gradcheck {
        /// TOML file; only `seed` is read.
        #[arg(long, short)]
        config: Option<PathBuf>,
        /// Seed for the model init and the check batch.
        #[arg(long)]
        seed: Option<u64>,
        /// Test hook: multiply the analytic gradient of this parameter
        /// group by `corrupt_factor` (the check should then fail).
        #[arg(long, value_name = "GROUP")]
        corrupt_group: Option<String>,
        /// Factor applied by `--corrupt-group`.
        #[arg(long, default_value_t = 1.5)]
        corrupt_factor: f64,
    },
}

fn run(cli: Cli) -> Result<bool> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::TrainLm(args) => commands::train_lm(&args.load("train-lm")?, &mut out)?,
        Command::TrainTagger(args) => commands::train_tagger(&args.load("train-tagger")?, &mut out)?,
        Command::Eval {
            checkpoint,
            corpus,
            metric,
            word_col,
            tag_col,
        } => commands::eval(&checkpoint, &corpus, metric, word_col, tag_col, &mut out)?,
        Command::Tag {
            checkpoint,
            input,
            output,
        } => match output {
            Some(p) => {
                let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                let mut w = BufWriter::new(f);
                commands::tag(&checkpoint, &input, &mut w)?;
                w.flush()?;
            }
            None => commands::tag(&checkpoint, &input, &mut out)?,
        },
        Command::Neighbors { checkpoint, k, words } => commands::neighbors(&checkpoint, &words, k, &mut out)?,
        Command::Params {
            checkpoint,
            vocab_size,
            num_chars,
            d,
            d_c,
            d_cs,
        } => {
            let dims = Dims {
                vocab_size,
                num_chars,
                d,
                d_c,
                d_cs,
            };
            commands::params(checkpoint.as_deref(), dims, &mut out)?
        }
        Command::Gradcheck {
            config,
            seed,
            corrupt_group,
            corrupt_factor,
        } => {
            let path = config.or_else(|| default_config_path("gradcheck"));
            let overrides = Overrides {
                seed,
                ..Default::default()
            };
            let cfg = RunConfig::load(path.as_deref(), &overrides)?;
            let corrupt = corrupt_group.map(|group| Corruption {
                group,
                factor: corrupt_factor,
            });
            let (ok, _) = commands::gradcheck(cfg.seed, corrupt.as_ref(), &mut out)?;
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

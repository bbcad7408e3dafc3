use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use kbqa::commands::{self, ExperimentFlags, ModeArg, TrainingFlags};

/// Program induction over a knowledge base: generate data, annotate with
/// search, pretrain, policy-gradient train, meta-train, evaluate, and answer
/// single questions.
#[derive(Parser)]
#[command(name = "kbqa", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    training: TrainingFlags,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic KB and train/validation/test question splits.
    Gen {
        /// Output directory for kb.txt and the three splits.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        experiment: ExperimentFlags,
    },
    /// Search pseudo-gold programs for a slice of a split.
    Annotate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long, default_value_t = 0)]
        skip: usize,
        /// Number of samples to annotate (0 = all remaining).
        #[arg(long, default_value_t = 0)]
        count: usize,
        /// Maximum program length to search.
        #[arg(long, default_value_t = 3)]
        max_len: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Teacher-force a fresh model on annotated programs.
    Pretrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        annotated: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// REINFORCE training on a slice of the train split.
    Pg {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        skip: usize,
        #[arg(long, default_value_t = 0)]
        count: usize,
    },
    /// Meta-RL training over retrieval-built pseudo tasks.
    Meta {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        skip: usize,
        /// Number of meta-training questions (0 = all remaining).
        #[arg(long, default_value_t = 0)]
        count: usize,
        /// Line-delimited JSON training log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Evaluate a checkpoint, frozen or adapted.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "frozen")]
        mode: ModeArg,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer one question by id, printing the program and the answer.
    Infer {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        id: String,
        /// Skip retrieval and adaptation; plain greedy decoding.
        #[arg(long)]
        frozen: bool,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = cli.training.load_config()?;
    match cli.command {
        Command::Gen { out, experiment } => {
            commands::cmd_gen(&out, cfg, &experiment, cli.training.seed)
        }
        Command::Annotate { data, split, skip, count, max_len, out } => commands::cmd_annotate(
            &data,
            &split,
            skip,
            count,
            max_len,
            cfg.training.int_literals as u64,
            &out,
        ),
        Command::Pretrain { data, annotated, out } => {
            commands::cmd_pretrain(&data, &annotated, &out, &cfg)
        }
        Command::Pg { data, model, out, skip, count } => {
            commands::cmd_pg(&data, &model, &out, skip, count, &cfg)
        }
        Command::Meta { data, model, out, skip, count, log } => {
            commands::cmd_meta(&data, &model, &out, skip, count, log.as_deref(), &cfg)
        }
        Command::Eval { data, model, mode, split, out } => {
            commands::cmd_eval(&data, &model, mode, &split, out.as_deref(), &cfg)
        }
        Command::Infer { data, model, id, frozen } => {
            commands::cmd_infer(&data, &model, &id, frozen, &cfg)
        }
    }
}

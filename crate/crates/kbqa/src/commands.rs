//! Implementations behind the `kbqa` binary's subcommands.
//!
//! Every subcommand accepts `--config <file>` (TOML, see [`crate::config`])
//! plus flags that override individual fields; `--seed` is available
//! everywhere. Data directories are produced by `gen` and contain `kb.txt`
//! plus `train/validation/test.jsonl`.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;

use crate::config::{Config, OuterUpdate};
use crate::data::{read_annotated, read_samples, write_annotated, write_samples, Sample};
use crate::eval::{evaluate, EvalMode};
use crate::generator::generate_dataset;
use crate::kb::KnowledgeBase;
use crate::policy::{InputVocab, Programmer};
use crate::retriever::build_profiles;
use crate::trainer::{
    bfs_annotate, build_tasks, embedder, infer, meta_train, pg_train, pretrain_teacher_forcing,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OuterUpdateArg {
    Reptile,
    FirstOrderMaml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Frozen,
    Adapted,
}

/// Flags mirroring every [`crate::config::TrainingConfig`] field.
#[derive(Debug, Clone, Args, Default)]
pub struct TrainingFlags {
    /// Config file (TOML) providing defaults for all flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub eta1: Option<f64>,
    #[arg(long, global = true)]
    pub eta2: Option<f64>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub k_prime: Option<usize>,
    #[arg(long, global = true)]
    pub n_support: Option<usize>,
    #[arg(long, global = true)]
    pub sim_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub max_decode_len: Option<usize>,
    #[arg(long, global = true)]
    pub batch_tasks: Option<usize>,
    #[arg(long, global = true)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub pg_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub meta_iterations: Option<usize>,
    #[arg(long, global = true)]
    pub outer_update: Option<OuterUpdateArg>,
    #[arg(long, global = true)]
    pub use_reward_baseline: Option<bool>,
    #[arg(long, global = true)]
    pub baseline_decay: Option<f64>,
    #[arg(long, global = true)]
    pub adam_lr: Option<f64>,
    #[arg(long, global = true)]
    pub adam_beta1: Option<f64>,
    #[arg(long, global = true)]
    pub adam_beta2: Option<f64>,
    #[arg(long, global = true)]
    pub adam_eps: Option<f64>,
    #[arg(long, global = true)]
    pub d_emb: Option<usize>,
    #[arg(long, global = true)]
    pub d_h: Option<usize>,
    #[arg(long, global = true)]
    pub entity_slots: Option<usize>,
    #[arg(long, global = true)]
    pub relation_slots: Option<usize>,
    #[arg(long, global = true)]
    pub type_slots: Option<usize>,
    #[arg(long, global = true)]
    pub int_literals: Option<usize>,
    #[arg(long, global = true)]
    pub checkpoint_every: Option<usize>,
    /// Master seed for all randomized procedures.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

macro_rules! override_field {
    ($target:expr, $flags:expr, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $flags.$field {
            $target.$field = v;
        })+
    };
}

impl TrainingFlags {
    pub fn load_config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let t = &mut cfg.training;
        override_field!(
            t, self, eta1, eta2, k, k_prime, n_support, sim_threshold, max_decode_len,
            batch_tasks, pretrain_epochs, pg_epochs, meta_iterations, use_reward_baseline,
            baseline_decay, adam_lr, adam_beta1, adam_beta2, adam_eps, d_emb, d_h, entity_slots,
            relation_slots, type_slots, int_literals, checkpoint_every, seed
        );
        if let Some(u) = self.outer_update {
            t.outer_update = match u {
                OuterUpdateArg::Reptile => OuterUpdate::Reptile,
                OuterUpdateArg::FirstOrderMaml => OuterUpdate::FirstOrderMaml,
            };
        }
        Ok(cfg)
    }
}

/// Flags mirroring every [`crate::config::ExperimentConfig`] field.
#[derive(Debug, Clone, Args, Default)]
pub struct ExperimentFlags {
    #[arg(long)]
    pub n_types: Option<usize>,
    #[arg(long)]
    pub entities_per_type: Option<usize>,
    #[arg(long)]
    pub n_relations: Option<usize>,
    #[arg(long)]
    pub participation: Option<f64>,
    #[arg(long)]
    pub max_fanout: Option<usize>,
    #[arg(long)]
    pub train_questions: Option<usize>,
    #[arg(long)]
    pub validation_questions: Option<usize>,
    #[arg(long)]
    pub test_questions: Option<usize>,
    /// Seven comma-separated relative weights, one per category.
    #[arg(long, value_delimiter = ',')]
    pub category_weights: Option<Vec<f64>>,
    #[arg(long)]
    pub template_retries: Option<usize>,
}

impl ExperimentFlags {
    pub fn apply(&self, cfg: &mut Config, seed: Option<u64>) -> Result<()> {
        let e = &mut cfg.experiment;
        override_field!(
            e, self, n_types, entities_per_type, n_relations, participation, max_fanout,
            train_questions, validation_questions, test_questions, template_retries
        );
        if let Some(w) = &self.category_weights {
            if w.len() != 7 {
                bail!("--category-weights takes exactly 7 values, got {}", w.len());
            }
            e.category_weights.copy_from_slice(w);
        }
        if let Some(s) = seed {
            e.seed = s;
        }
        Ok(())
    }
}

pub struct DataDir {
    pub kb: KnowledgeBase,
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
}

pub fn load_data(dir: &Path) -> Result<DataDir> {
    let kb = KnowledgeBase::load(&dir.join("kb.txt"))
        .with_context(|| format!("loading {}", dir.join("kb.txt").display()))?;
    Ok(DataDir {
        kb,
        train: read_samples(&dir.join("train.jsonl"))?,
        validation: read_samples(&dir.join("validation.jsonl"))?,
        test: read_samples(&dir.join("test.jsonl"))?,
    })
}

fn slice(samples: &[Sample], skip: usize, count: usize) -> Result<&[Sample]> {
    if skip > samples.len() {
        bail!("--skip {} exceeds the split size {}", skip, samples.len());
    }
    let rest = &samples[skip..];
    Ok(match count {
        0 => rest,
        n => &rest[..n.min(rest.len())],
    })
}

pub fn cmd_gen(out: &Path, mut cfg: Config, flags: &ExperimentFlags, seed: Option<u64>) -> Result<()> {
    flags.apply(&mut cfg, seed)?;
    let data = generate_dataset(&cfg.experiment)?;
    std::fs::create_dir_all(out)?;
    data.kb.save(&out.join("kb.txt"))?;
    write_samples(&out.join("train.jsonl"), &data.train)?;
    write_samples(&out.join("validation.jsonl"), &data.validation)?;
    write_samples(&out.join("test.jsonl"), &data.test)?;
    std::fs::write(out.join("config.toml"), toml::to_string(&cfg)?)?;
    println!(
        "generated kb ({} entities, {} triples) and {}/{}/{} train/validation/test questions into {}",
        data.kb.num_entities(),
        data.kb.num_triples(),
        data.train.len(),
        data.validation.len(),
        data.test.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_annotate(
    data_dir: &Path,
    split: &str,
    skip: usize,
    count: usize,
    max_len: usize,
    max_int: u64,
    out: &Path,
) -> Result<()> {
    let data = load_data(data_dir)?;
    let samples = match split {
        "train" => &data.train,
        "validation" => &data.validation,
        "test" => &data.test,
        other => bail!("unknown split {other:?}"),
    };
    let chosen = slice(samples, skip, count)?;
    let annotated: Vec<_> = chosen
        .par_iter()
        .map(|s| bfs_annotate(s, &data.kb, max_len, max_int))
        .collect();
    let found: Vec<_> = annotated.into_iter().flatten().collect();
    write_annotated(out, &found)?;
    println!(
        "annotated {}/{} samples (max_len {max_len}) into {}",
        found.len(),
        chosen.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_pretrain(data_dir: &Path, annotated_path: &Path, out: &Path, cfg: &Config) -> Result<()> {
    let data = load_data(data_dir)?;
    let annotated = read_annotated(annotated_path)?;
    if annotated.is_empty() {
        bail!("no annotated samples in {}", annotated_path.display());
    }
    let vocab = InputVocab::build(&data.kb, &data.train);
    let mut model = Programmer::init(cfg.training.model_config(), vocab, cfg.training.seed);
    let stats = pretrain_teacher_forcing(&mut model, &annotated, &cfg.training)?;
    model.save(out)?;
    match (stats.epoch_losses.first(), stats.epoch_losses.last()) {
        (Some(first), Some(last)) => println!(
            "pretrained on {} records for {} epochs (loss {first:.4} -> {last:.4}); saved {}",
            annotated.len(),
            stats.epoch_losses.len(),
            out.display()
        ),
        _ => println!("pretrain ran 0 epochs; saved {}", out.display()),
    }
    Ok(())
}

pub fn cmd_pg(
    data_dir: &Path,
    model_path: &Path,
    out: &Path,
    skip: usize,
    count: usize,
    cfg: &Config,
) -> Result<()> {
    let data = load_data(data_dir)?;
    let mut model = Programmer::load(model_path)?;
    let chosen = slice(&data.train, skip, count)?;
    let stats = pg_train(&mut model, chosen, &data.kb, &cfg.training)?;
    model.save(out)?;
    match (stats.epoch_rewards.first(), stats.epoch_rewards.last()) {
        (Some(first), Some(last)) => println!(
            "policy-gradient trained on {} questions for {} epochs (mean reward {first:.4} -> {last:.4}, {} updates); saved {}",
            chosen.len(),
            stats.epoch_rewards.len(),
            stats.updates_applied,
            out.display()
        ),
        _ => println!("pg ran 0 epochs; saved {}", out.display()),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_meta(
    data_dir: &Path,
    model_path: &Path,
    out: &Path,
    skip: usize,
    count: usize,
    log_path: Option<&Path>,
    cfg: &Config,
) -> Result<()> {
    let data = load_data(data_dir)?;
    let mut model = Programmer::load(model_path)?;
    let q_meta = slice(&data.train, skip, count)?;
    let tasks = build_tasks(q_meta, &data.train, &model, &cfg.training);
    let mut log = match log_path {
        Some(p) => Some(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => None,
    };
    let checkpoint_stem = out.with_extension("");
    let mut last_reward = 0.0;
    meta_train(&mut model, &tasks, &data.kb, &cfg.training, |record, current| {
        if let Some(w) = log.as_mut() {
            serde_json::to_writer(&mut *w, record).expect("log record");
            w.write_all(b"\n").expect("log write");
        }
        last_reward = record.mean_meta_test_reward;
        let cadence = cfg.training.checkpoint_every;
        if cadence > 0 && (record.iteration + 1) % cadence == 0 {
            let path = PathBuf::from(format!(
                "{}.iter{:05}.json",
                checkpoint_stem.display(),
                record.iteration + 1
            ));
            current.save(&path).expect("cadence checkpoint");
        }
    })?;
    if let Some(mut w) = log {
        w.flush()?;
    }
    model.save(out)?;
    println!(
        "meta-trained on {} tasks for {} iterations (last mean meta-test reward {last_reward:.4}); saved {}",
        tasks.len(),
        cfg.training.meta_iterations,
        out.display()
    );
    Ok(())
}

pub fn cmd_eval(
    data_dir: &Path,
    model_path: &Path,
    mode: ModeArg,
    split: &str,
    out: Option<&Path>,
    cfg: &Config,
) -> Result<()> {
    let data = load_data(data_dir)?;
    let model = Programmer::load(model_path)?;
    let samples = match split {
        "train" => &data.train,
        "validation" => &data.validation,
        "test" => &data.test,
        other => bail!("unknown split {other:?}"),
    };
    let mode = match mode {
        ModeArg::Frozen => EvalMode::Frozen,
        ModeArg::Adapted => EvalMode::Adapted,
    };
    let report = evaluate(&model, samples, &data.train, &data.kb, &cfg.training, mode)?;
    for (category, f1) in &report.per_category_f1 {
        println!("{category:<20} {:.4}", f1);
    }
    println!("macro F1             {:.4}", report.macro_f1);
    println!("micro F1             {:.4}", report.micro_f1);
    if let Some(path) = out {
        report.save(path)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

pub fn cmd_infer(
    data_dir: &Path,
    model_path: &Path,
    id: &str,
    frozen: bool,
    cfg: &Config,
) -> Result<()> {
    let data = load_data(data_dir)?;
    let model = Programmer::load(model_path)?;
    let sample = data
        .test
        .iter()
        .chain(&data.validation)
        .chain(&data.train)
        .find(|s| s.id == id)
        .with_context(|| format!("no sample with id {id:?} in any split"))?;
    println!("question: {}", sample.question_tokens.join(" "));
    let (program, answer, valid, support) = if frozen {
        let q = model.input(sample)?;
        let tokens = model.greedy_decode(&q, cfg.training.max_decode_len)?;
        let (answer, program, valid) = crate::trainer::decode_answer(&model, sample, &data.kb, &tokens);
        (program, answer, valid, Vec::new())
    } else {
        let profiles = build_profiles(&data.train, embedder(&model));
        let seed = crate::trainer::derive_seed(
            cfg.training.seed,
            &[crate::generator::stable_hash("infer"), crate::generator::stable_hash(id)],
        );
        let inference = infer(&model, sample, &data.train, &profiles, &data.kb, &cfg.training, seed)?;
        let support: Vec<(String, f64)> = inference
            .support
            .iter()
            .map(|i| (i.sample.id.clone(), i.score))
            .collect();
        (inference.program, inference.answer, inference.valid, support)
    };
    if !support.is_empty() {
        println!("support set:");
        for (sid, score) in &support {
            println!("  {sid}  (score {score:.4})");
        }
    }
    match &program {
        Some(p) => println!("program:\n{p}"),
        None => println!("program: <decoded tokens did not assemble>"),
    }
    if !valid {
        println!("note: program did not execute; answering with the empty set");
    }
    println!("answer: {answer}");
    println!("gold:   {}", sample.gold_answer);
    Ok(())
}

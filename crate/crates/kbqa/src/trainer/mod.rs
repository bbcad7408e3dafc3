//! Learning procedures: pseudo-gold annotation, teacher forcing, policy
//! gradients, and the meta-RL loop.
//!
//! The meta loop expands each chosen training question into a pseudo task
//! (the question plus its retrieved support set, frozen at construction).
//! Per task, the current policy is adapted with one plain-gradient step per
//! support question (step size `eta1`), evaluated by sampling the task's own
//! question under the adapted weights, nudged once more by the meta-test
//! gradient, and the outer update moves the shared initialization toward the
//! result (Reptile) or along the meta-test gradient (first-order MAML).

mod bfs;
mod pg;
mod pretrain;

pub use bfs::bfs_annotate;
pub use pg::{pg_train, PgStats};
pub use pretrain::{pretrain_teacher_forcing, PretrainStats};

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{OuterUpdate, TrainingConfig};
use crate::data::Sample;
use crate::generator::stable_hash;
use crate::interpreter::{execute, reward, AnswerValue};
use crate::kb::KnowledgeBase;
use crate::policy::{ModelError, Programmer, Trajectory};
use crate::program::Program;
use crate::retriever::{build_profiles, retrieve, QuestionProfile, SupportSet};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("sample {id:?}: pseudo-gold program does not fit the output vocabulary")]
    Untokenizable { id: String },
}

/// Mix a base seed with context words into a new stream seed (splitmix64).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = z.wrapping_add(0x9e3779b97f4a7c15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
    }
    z
}

/// Score sampled trajectories in place against the sample's gold answer.
pub fn score_trajectories(
    model: &Programmer,
    sample: &Sample,
    kb: &KnowledgeBase,
    trajectories: &mut [Trajectory],
) {
    for traj in trajectories {
        let answer = decode_answer(model, sample, kb, &traj.tokens).0;
        traj.reward = reward(&answer, &sample.gold_answer);
    }
}

/// Execute a decoded token sequence for `sample` on `kb`. Sequences that do
/// not assemble into a valid executable program denote the empty entity set.
pub fn decode_answer(
    model: &Programmer,
    sample: &Sample,
    kb: &KnowledgeBase,
    tokens: &[usize],
) -> (AnswerValue, Option<Program>, bool) {
    match model.out.assemble_program(tokens, &sample.artifacts) {
        Some(program) => match execute(&program, kb) {
            Ok(answer) => (answer, Some(program), true),
            Err(_) => (AnswerValue::empty_entities(), Some(program), false),
        },
        None => (AnswerValue::empty_entities(), None, false),
    }
}

/// A meta-learning task: one target question plus its frozen support set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoTask {
    pub meta_test: Sample,
    pub support: SupportSet,
}

/// Expand meta-training questions into pseudo tasks by retrieval. Support
/// sets are computed once, against the model's current embeddings, and
/// frozen for the rest of training.
pub fn build_tasks(
    q_meta: &[Sample],
    corpus: &[Sample],
    model: &Programmer,
    cfg: &TrainingConfig,
) -> Vec<PseudoTask> {
    let embed = embedder(model);
    let profiles = build_profiles(corpus, &embed);
    q_meta
        .iter()
        .map(|q| {
            let qp = QuestionProfile::from_sample(q, &embed);
            let support = retrieve(&qp, &q.id, corpus, &profiles, cfg.n_support, cfg.sim_threshold);
            PseudoTask {
                meta_test: q.clone(),
                support,
            }
        })
        .collect()
}

/// Word-embedding lookup backed by the model's input-embedding table.
pub fn embedder(model: &Programmer) -> impl Fn(&str) -> Vec<f64> + '_ {
    move |w: &str| {
        let id = model.vocab.id(w);
        model.params.row(model.layout.embed_in, id).to_vec()
    }
}

struct AdaptOutcome {
    model: Programmer,
    reward_sum: f64,
    reward_count: usize,
}

fn adapt_inner(
    model: &Programmer,
    support: &SupportSet,
    kb: &KnowledgeBase,
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<AdaptOutcome, TrainError> {
    let mut adapted = model.clone();
    let mut reward_sum = 0.0;
    let mut reward_count = 0;
    for (i, item) in support.members.iter().enumerate() {
        let q = adapted.input(&item.sample)?;
        let step_seed = derive_seed(seed, &[stable_hash("adapt"), i as u64]);
        let prepared = adapted.prepare(&q)?;
        let mut trajs = adapted.sample_prepared(&prepared, cfg.k, cfg.max_decode_len, step_seed);
        score_trajectories(&adapted, &item.sample, kb, &mut trajs);
        reward_sum += trajs.iter().map(|t| t.reward).sum::<f64>();
        reward_count += trajs.len();
        let grad = adapted.surrogate_grad_prepared(&prepared, &trajs)?;
        adapted.params.axpy(cfg.eta1, &grad);
    }
    Ok(AdaptOutcome {
        model: adapted,
        reward_sum,
        reward_count,
    })
}

/// Adapt the policy to a support set: for each support question in order,
/// sample `k` trajectories under the current weights and take one plain
/// ascent step of size `eta1` on the REINFORCE surrogate. The input model
/// is never mutated; `eta1 = 0` returns it bit-identically.
pub fn adapt(
    model: &Programmer,
    support: &SupportSet,
    kb: &KnowledgeBase,
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<Programmer, TrainError> {
    Ok(adapt_inner(model, support, kb, cfg, seed)?.model)
}

/// Everything one task contributes to an outer iteration.
pub struct MetaTaskOutcome {
    /// Parameters after inner adaptation plus one meta-test gradient step.
    pub theta_after: Vec<f64>,
    /// The meta-test gradient at the adapted parameters.
    pub meta_grad: Vec<f64>,
    pub inner_reward_sum: f64,
    pub inner_reward_count: usize,
    pub meta_reward_mean: f64,
}

/// Inner adaptation plus meta-test evaluation for one task.
pub fn meta_task_step(
    model: &Programmer,
    task: &PseudoTask,
    kb: &KnowledgeBase,
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<MetaTaskOutcome, TrainError> {
    let inner = adapt_inner(model, &task.support, kb, cfg, seed)?;
    let mut adapted = inner.model;
    let q = adapted.input(&task.meta_test)?;
    let meta_seed = derive_seed(seed, &[stable_hash("meta-test")]);
    let prepared = adapted.prepare(&q)?;
    let mut trajs = adapted.sample_prepared(&prepared, cfg.k_prime, cfg.max_decode_len, meta_seed);
    score_trajectories(&adapted, &task.meta_test, kb, &mut trajs);
    let meta_reward_mean = if trajs.is_empty() {
        0.0
    } else {
        trajs.iter().map(|t| t.reward).sum::<f64>() / trajs.len() as f64
    };
    let meta_grad = adapted.surrogate_grad_prepared(&prepared, &trajs)?;
    adapted.params.axpy(cfg.eta1, &meta_grad);
    Ok(MetaTaskOutcome {
        theta_after: adapted.params.data,
        meta_grad,
        inner_reward_sum: inner.reward_sum,
        inner_reward_count: inner.reward_count,
        meta_reward_mean,
    })
}

/// One line of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetaLogRecord {
    pub iteration: usize,
    pub mean_meta_test_reward: f64,
    pub mean_inner_reward: f64,
    pub wall_ms: u64,
}

/// The meta-training loop. Each outer iteration samples `batch_tasks` tasks
/// uniformly, runs [`meta_task_step`] on each, and applies the outer update
/// (`eta2 = 0` leaves the parameters bit-unchanged). The observer sees every
/// iteration's log record and the current model, in order.
pub fn meta_train(
    model: &mut Programmer,
    tasks: &[PseudoTask],
    kb: &KnowledgeBase,
    cfg: &TrainingConfig,
    mut observer: impl FnMut(&MetaLogRecord, &Programmer),
) -> Result<(), TrainError> {
    if tasks.is_empty() {
        return Ok(());
    }
    let mut selector = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[stable_hash("meta-select")]));
    for iteration in 0..cfg.meta_iterations {
        let started = Instant::now();
        let batch: Vec<usize> = (0..cfg.batch_tasks.max(1))
            .map(|_| selector.random_range(0..tasks.len()))
            .collect();

        let mut outcomes = Vec::with_capacity(batch.len());
        for (slot, &task_idx) in batch.iter().enumerate() {
            let seed = derive_seed(cfg.seed, &[stable_hash("meta-task"), iteration as u64, slot as u64]);
            outcomes.push(meta_task_step(model, &tasks[task_idx], kb, cfg, seed)?);
        }

        if cfg.eta2 != 0.0 {
            let b = outcomes.len() as f64;
            match cfg.outer_update {
                OuterUpdate::Reptile => {
                    // θ ← (1 - η2)·θ + η2·mean(θ''): with η2 = 1 and one task
                    // this lands exactly on θ''.
                    for i in 0..model.params.len() {
                        let mean: f64 = outcomes.iter().map(|o| o.theta_after[i]).sum::<f64>() / b;
                        model.params.data[i] = (1.0 - cfg.eta2) * model.params.data[i] + cfg.eta2 * mean;
                    }
                }
                OuterUpdate::FirstOrderMaml => {
                    for i in 0..model.params.len() {
                        let mean: f64 = outcomes.iter().map(|o| o.meta_grad[i]).sum::<f64>() / b;
                        model.params.data[i] += cfg.eta2 * mean;
                    }
                }
            }
        }

        let inner_sum: f64 = outcomes.iter().map(|o| o.inner_reward_sum).sum();
        let inner_count: usize = outcomes.iter().map(|o| o.inner_reward_count).sum();
        let record = MetaLogRecord {
            iteration,
            mean_meta_test_reward: outcomes.iter().map(|o| o.meta_reward_mean).sum::<f64>()
                / outcomes.len() as f64,
            mean_inner_reward: if inner_count == 0 {
                0.0
            } else {
                inner_sum / inner_count as f64
            },
            wall_ms: started.elapsed().as_millis() as u64,
        };
        observer(&record, model);
    }
    Ok(())
}

/// The result of adapted inference on one question.
#[derive(Debug, Clone)]
pub struct Inference {
    pub answer: AnswerValue,
    pub program: Option<Program>,
    pub tokens: Vec<usize>,
    pub support: SupportSet,
    /// False when the decoded sequence did not assemble or execute; the
    /// answer is then the empty entity set.
    pub valid: bool,
}

/// Answer one question by adapting a per-question copy of the policy on its
/// retrieved support set, then greedy-decoding. The input model is never
/// mutated. An empty corpus degrades to pure greedy decoding.
pub fn infer(
    model: &Programmer,
    question: &Sample,
    corpus: &[Sample],
    corpus_profiles: &[QuestionProfile],
    kb: &KnowledgeBase,
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<Inference, TrainError> {
    let support = if corpus.is_empty() {
        SupportSet::default()
    } else {
        let embed = embedder(model);
        let qp = QuestionProfile::from_sample(question, &embed);
        retrieve(&qp, &question.id, corpus, corpus_profiles, cfg.n_support, cfg.sim_threshold)
    };
    let adapted = adapt(model, &support, kb, cfg, seed)?;
    let q = adapted.input(question)?;
    let tokens = adapted.greedy_decode(&q, cfg.max_decode_len)?;
    let (answer, program, valid) = decode_answer(&adapted, question, kb, &tokens);
    Ok(Inference {
        answer,
        program,
        tokens,
        support,
        valid,
    })
}

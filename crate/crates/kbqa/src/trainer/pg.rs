//! REINFORCE policy-gradient training with Adam.

use crate::config::TrainingConfig;
use crate::data::Sample;
use crate::generator::stable_hash;
use crate::kb::KnowledgeBase;
use crate::policy::{Adam, Programmer};
use crate::trainer::{derive_seed, score_trajectories, TrainError};

#[derive(Debug, Clone, Default)]
pub struct PgStats {
    /// Mean sampled reward per epoch.
    pub epoch_rewards: Vec<f64>,
    /// Cumulative applied updates at the end of each epoch.
    pub epoch_updates: Vec<usize>,
    /// Trajectories drawn per update (the configured K).
    pub trajectories_per_update: usize,
    /// Updates actually applied (all-zero-reward batches are skipped).
    pub updates_applied: usize,
}

/// For each question, sample `k` trajectories, score them with the
/// interpreter, and ascend the REINFORCE surrogate with Adam. Batches whose
/// trajectories all score zero leave the parameters untouched. With
/// `use_reward_baseline`, a moving average of batch rewards is subtracted
/// before the gradient step.
pub fn pg_train(
    model: &mut Programmer,
    samples: &[Sample],
    kb: &KnowledgeBase,
    cfg: &TrainingConfig,
) -> Result<PgStats, TrainError> {
    let mut stats = PgStats {
        trajectories_per_update: cfg.k,
        ..PgStats::default()
    };
    if samples.is_empty() {
        return Ok(stats);
    }
    let mut adam = Adam::new(cfg.adam(), model.layout.total);
    let mut baseline: Option<f64> = None;
    for epoch in 0..cfg.pg_epochs {
        let mut reward_sum = 0.0;
        let mut reward_count = 0usize;
        for (i, sample) in samples.iter().enumerate() {
            let q = model.input(sample)?;
            let seed = derive_seed(cfg.seed, &[stable_hash("pg"), epoch as u64, i as u64]);
            let mut trajs = model.sample(&q, cfg.k, cfg.max_decode_len, seed)?;
            score_trajectories(model, sample, kb, &mut trajs);
            let batch_mean = trajs.iter().map(|t| t.reward).sum::<f64>() / trajs.len() as f64;
            reward_sum += trajs.iter().map(|t| t.reward).sum::<f64>();
            reward_count += trajs.len();

            if trajs.iter().all(|t| t.reward == 0.0) {
                // Nothing to reinforce; skipping also keeps Adam's momentum
                // from drifting the parameters on an all-zero batch.
                continue;
            }
            if cfg.use_reward_baseline {
                let b = *baseline.get_or_insert(batch_mean);
                for t in &mut trajs {
                    t.reward -= b;
                }
                baseline = Some(cfg.baseline_decay * b + (1.0 - cfg.baseline_decay) * batch_mean);
            }
            let grad = model.surrogate_grad(&q, &trajs)?;
            // Adam minimizes; feed the descent direction of -surrogate.
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            adam.step(&mut model.params.data, &neg);
            stats.updates_applied += 1;
        }
        stats.epoch_rewards.push(reward_sum / reward_count.max(1) as f64);
        stats.epoch_updates.push(stats.updates_applied);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AnnotatedSample, ArtifactTable, Category};
    use crate::interpreter::AnswerValue;
    use crate::policy::{InputVocab, ModelConfig};
    use crate::program::Program;
    use crate::trainer::pretrain_teacher_forcing;

    fn setup() -> (KnowledgeBase, Sample) {
        let kb = KnowledgeBase::parse(
            "#type China country\n#type Ganges river\n#type Volga river\n\
             China flow Ganges\nChina flow Volga\n",
        )
        .unwrap();
        let sample = Sample {
            id: "q".into(),
            category: Category::Simple,
            question_tokens: vec!["which".into(), "river".into(), "flow".into(), "China".into()],
            artifacts: ArtifactTable {
                entities: vec!["China".into()],
                relations: vec!["flow".into()],
                types: vec!["river".into()],
            },
            gold_answer: AnswerValue::Entities(vec!["Ganges".into(), "Volga".into()]),
            gold_program: None,
        };
        (kb, sample)
    }

    fn model(kb: &KnowledgeBase, sample: &Sample, seed: u64) -> Programmer {
        let vocab = InputVocab::build(kb, [sample]);
        let cfg = ModelConfig {
            d_emb: 8,
            d_h: 16,
            entity_slots: 1,
            relation_slots: 1,
            type_slots: 1,
            int_literals: 2,
            ..ModelConfig::default()
        };
        Programmer::init(cfg, vocab, seed)
    }

    #[test]
    fn all_zero_reward_batches_leave_parameters_unchanged() {
        let (kb, mut sample) = setup();
        // An unreachable gold answer: every trajectory scores 0.
        sample.gold_answer = AnswerValue::Count(999);
        let mut m = model(&kb, &sample, 3);
        let before = m.params.clone();
        let cfg = TrainingConfig {
            pg_epochs: 2,
            max_decode_len: 6,
            ..TrainingConfig::default()
        };
        let stats = pg_train(&mut m, &[sample], &kb, &cfg).unwrap();
        assert_eq!(m.params, before);
        assert_eq!(stats.updates_applied, 0);
    }

    #[test]
    fn k_is_read_from_config() {
        let (kb, sample) = setup();
        let mut m = model(&kb, &sample, 3);
        let cfg = TrainingConfig {
            pg_epochs: 1,
            ..TrainingConfig::default()
        };
        assert_eq!(cfg.k, 5);
        let stats = pg_train(&mut m, &[sample], &kb, &cfg).unwrap();
        assert_eq!(stats.trajectories_per_update, 5);
    }

    #[test]
    fn reward_climbs_on_a_trivial_question() {
        let (kb, sample) = setup();
        let mut m = model(&kb, &sample, 11);
        // Brief warm start so sampling has nonzero mass on well-formed
        // programs, then policy gradients drive the reward up.
        let annotated = AnnotatedSample {
            sample: sample.clone(),
            program: Program::parse("SELECT(China, flow, river)").unwrap(),
        };
        let warm = TrainingConfig {
            pretrain_epochs: 80,
            adam_lr: 1e-2,
            ..TrainingConfig::default()
        };
        pretrain_teacher_forcing(&mut m, &[annotated], &warm).unwrap();

        let cfg = TrainingConfig {
            pg_epochs: 300,
            adam_lr: 1e-2,
            max_decode_len: 8,
            seed: 1,
            ..TrainingConfig::default()
        };
        let stats = pg_train(&mut m, &[sample], &kb, &cfg).unwrap();
        // Mean sampled reward must reach 0.9 within 200 applied updates.
        let reached = stats
            .epoch_rewards
            .iter()
            .zip(&stats.epoch_updates)
            .any(|(r, u)| *r >= 0.9 && *u <= 200);
        assert!(reached, "rewards: {:?}", &stats.epoch_rewards[..20.min(stats.epoch_rewards.len())]);
    }
}

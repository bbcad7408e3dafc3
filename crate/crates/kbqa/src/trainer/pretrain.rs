//! Teacher forcing on pseudo-gold programs (behavior cloning).

use crate::config::TrainingConfig;
use crate::data::AnnotatedSample;
use crate::policy::{Adam, Programmer};
use crate::trainer::TrainError;

#[derive(Debug, Clone, Default)]
pub struct PretrainStats {
    /// Mean per-token cross-entropy per epoch.
    pub epoch_losses: Vec<f64>,
    /// Cross-entropy of the very first record seen (before any update).
    pub first_loss: Option<f64>,
}

/// Minimize the mean per-token cross-entropy of the pseudo-gold token
/// sequences under the policy with Adam, one record per update, for
/// `pretrain_epochs` passes. Zero epochs return the model unchanged.
pub fn pretrain_teacher_forcing(
    model: &mut Programmer,
    annotated: &[AnnotatedSample],
    cfg: &TrainingConfig,
) -> Result<PretrainStats, TrainError> {
    let mut stats = PretrainStats::default();
    if annotated.is_empty() {
        return Ok(stats);
    }
    let mut adam = Adam::new(cfg.adam(), model.layout.total);
    let mut grad = vec![0.0; model.layout.total];
    for _ in 0..cfg.pretrain_epochs {
        let mut loss_sum = 0.0;
        for record in annotated {
            let q = model.input(&record.sample)?;
            let tokens = model
                .out
                .tokenize_program(&record.program, &record.sample.artifacts)
                .ok_or_else(|| TrainError::Untokenizable {
                    id: record.sample.id.clone(),
                })?;
            grad.fill(0.0);
            // Ascent gradient of -mean(log π) is the cross-entropy gradient.
            let weight = -1.0 / tokens.len() as f64;
            let loss = model.accumulate_weighted_grad(&q, &tokens, weight, &mut grad)?;
            adam.step(&mut model.params.data, &grad);
            loss_sum += loss;
            stats.first_loss.get_or_insert(loss);
        }
        stats.epoch_losses.push(loss_sum / annotated.len() as f64);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AnnotatedSample, ArtifactTable, Category, Sample};
    use crate::interpreter::AnswerValue;
    use crate::kb::KnowledgeBase;
    use crate::policy::{InputVocab, ModelConfig, Params};
    use crate::program::Program;

    fn setup() -> (KnowledgeBase, AnnotatedSample) {
        let kb = KnowledgeBase::parse(
            "#type China country\n#type India country\n#type Delhi city\n\
             #type Ganges river\n#type Volga river\n\
             China flow Ganges\nChina flow Volga\nIndia capital Delhi\n",
        )
        .unwrap();
        let sample = Sample {
            id: "q".into(),
            category: Category::Simple,
            question_tokens: vec![
                "which".into(),
                "river".into(),
                "flow".into(),
                "China".into(),
                "India".into(),
                "Delhi".into(),
            ],
            artifacts: ArtifactTable {
                entities: vec!["China".into(), "India".into(), "Delhi".into()],
                relations: vec!["flow".into(), "capital".into()],
                types: vec!["river".into(), "city".into()],
            },
            gold_answer: AnswerValue::Entities(vec!["Ganges".into(), "Volga".into()]),
            gold_program: None,
        };
        let program = Program::parse("SELECT(China, flow, river)").unwrap();
        (kb, AnnotatedSample { sample, program })
    }

    fn model(kb: &KnowledgeBase, rec: &AnnotatedSample, seed: u64) -> Programmer {
        let vocab = InputVocab::build(kb, [&rec.sample]);
        let cfg = ModelConfig {
            d_emb: 8,
            d_h: 16,
            ..ModelConfig::default()
        };
        Programmer::init(cfg, vocab, seed)
    }

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let (kb, rec) = setup();
        let mut m = model(&kb, &rec, 5);
        let before = m.params.clone();
        let cfg = TrainingConfig {
            pretrain_epochs: 0,
            ..TrainingConfig::default()
        };
        pretrain_teacher_forcing(&mut m, &[rec], &cfg).unwrap();
        assert_eq!(m.params, before);
    }

    #[test]
    fn first_loss_at_uniform_init_is_log_vocab() {
        let (kb, rec) = setup();
        let mut m = model(&kb, &rec, 5);
        // Zero weights make every step's distribution uniform, and this
        // sample fills every slot so nothing is masked.
        m.params = Params::zeros(&m.layout);
        let cfg = TrainingConfig {
            pretrain_epochs: 1,
            ..TrainingConfig::default()
        };
        let stats = pretrain_teacher_forcing(&mut m, &[rec], &cfg).unwrap();
        let expected = (m.out.size() as f64).ln();
        assert!((stats.first_loss.unwrap() - expected).abs() < 1e-6);
    }

    #[test]
    fn memorizes_a_single_program() {
        let (kb, rec) = setup();
        let mut m = model(&kb, &rec, 7);
        let cfg = TrainingConfig {
            pretrain_epochs: 300,
            adam_lr: 1e-2,
            ..TrainingConfig::default()
        };
        let stats = pretrain_teacher_forcing(&mut m, &[rec.clone()], &cfg).unwrap();
        assert!(stats.epoch_losses.last().unwrap() < &0.05);
        let q = m.input(&rec.sample).unwrap();
        let decoded = m.greedy_decode(&q, 16).unwrap();
        let expected = m
            .out
            .tokenize_program(&rec.program, &rec.sample.artifacts)
            .unwrap();
        assert_eq!(decoded, expected);
    }
}

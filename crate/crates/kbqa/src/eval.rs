//! F1 evaluation over a test split, frozen or adapted.
//!
//! Frozen mode greedy-decodes under the given parameters; adapted mode runs
//! per-question retrieval and adaptation on a private copy of the model.
//! Per-question F1 is the harmonic mean of set precision/recall for entity
//! answers; count and boolean answers use the interpreter's reward (exact /
//! positional match), which keeps every category on a [0, 1] scale. The
//! report records that convention.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::TrainingConfig;
use crate::data::{Category, Sample};
use crate::generator::stable_hash;
use crate::interpreter::{reward, AnswerValue};
use crate::kb::KnowledgeBase;
use crate::policy::Programmer;
use crate::retriever::build_profiles;
use crate::trainer::{decode_answer, derive_seed, embedder, infer, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Greedy decoding under the shared parameters.
    Frozen,
    /// Per-question retrieval + adaptation before decoding.
    Adapted,
}

/// Per-question F1: set precision/recall for entity answers, reward
/// otherwise. Two empty entity sets agree exactly.
pub fn question_f1(predicted: &AnswerValue, gold: &AnswerValue) -> f64 {
    match (predicted, gold) {
        (AnswerValue::Entities(_), AnswerValue::Entities(_)) => {
            let p = predicted.as_entity_set().expect("entity variant");
            let g = gold.as_entity_set().expect("entity variant");
            if p.is_empty() && g.is_empty() {
                return 1.0;
            }
            if p.is_empty() || g.is_empty() {
                return 0.0;
            }
            let overlap = p.intersection(&g).len() as f64;
            if overlap == 0.0 {
                return 0.0;
            }
            let precision = overlap / p.len() as f64;
            let recall = overlap / g.len() as f64;
            2.0 * precision * recall / (precision + recall)
        }
        _ => reward(predicted, gold),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub category: Category,
    pub predicted: AnswerValue,
    pub f1: f64,
    /// Text form of the decoded program; empty when decoding produced no
    /// assemblable program.
    pub program: String,
    pub valid: bool,
    /// Support-set ids and relevance scores (adapted mode only), for audit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub support: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    /// Convention note for non-set answer kinds.
    pub f1_convention: String,
    pub per_category_f1: BTreeMap<String, f64>,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub records: Vec<QuestionRecord>,
}

impl EvalReport {
    fn aggregate(mode: EvalMode, records: Vec<QuestionRecord>) -> EvalReport {
        let micro_f1 = if records.is_empty() {
            0.0
        } else {
            records.iter().map(|r| r.f1).sum::<f64>() / records.len() as f64
        };
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for r in &records {
            let entry = sums.entry(r.category.name().to_string()).or_insert((0.0, 0));
            entry.0 += r.f1;
            entry.1 += 1;
        }
        let per_category_f1: BTreeMap<String, f64> = sums
            .into_iter()
            .map(|(k, (sum, n))| (k, sum / n as f64))
            .collect();
        let macro_f1 = if per_category_f1.is_empty() {
            0.0
        } else {
            per_category_f1.values().sum::<f64>() / per_category_f1.len() as f64
        };
        EvalReport {
            mode,
            f1_convention:
                "entity answers: harmonic mean of set precision/recall; count and boolean \
                 answers: exact/positional-match reward"
                    .to_string(),
            per_category_f1,
            macro_f1,
            micro_f1,
            records,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("report serialization");
        bytes.push(b'\n');
        std::fs::write(path, bytes)
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<EvalReport> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(std::io::Error::other)
    }
}

/// Evaluate `model` on `test`. `corpus` feeds retrieval in adapted mode
/// (pass the training split). Questions are independent and scored in
/// parallel; per-question seeds derive from the sample id, so results do
/// not depend on thread scheduling.
pub fn evaluate(
    model: &Programmer,
    test: &[Sample],
    corpus: &[Sample],
    kb: &KnowledgeBase,
    cfg: &TrainingConfig,
    mode: EvalMode,
) -> Result<EvalReport, TrainError> {
    let profiles = match mode {
        EvalMode::Frozen => Vec::new(),
        EvalMode::Adapted => build_profiles(corpus, embedder(model)),
    };
    let records: Result<Vec<QuestionRecord>, TrainError> = test
        .par_iter()
        .map(|sample| {
            let (predicted, program, valid, support) = match mode {
                EvalMode::Frozen => {
                    let q = model.input(sample)?;
                    let tokens = model.greedy_decode(&q, cfg.max_decode_len)?;
                    let (answer, program, valid) = decode_answer(model, sample, kb, &tokens);
                    (answer, program, valid, Vec::new())
                }
                EvalMode::Adapted => {
                    let seed = derive_seed(cfg.seed, &[stable_hash("eval"), stable_hash(&sample.id)]);
                    let inference = infer(model, sample, corpus, &profiles, kb, cfg, seed)?;
                    let support = inference
                        .support
                        .iter()
                        .map(|item| (item.sample.id.clone(), item.score))
                        .collect();
                    (inference.answer, inference.program, inference.valid, support)
                }
            };
            Ok(QuestionRecord {
                id: sample.id.clone(),
                category: sample.category,
                f1: question_f1(&predicted, &sample.gold_answer),
                predicted,
                program: program.map(|p| p.to_string()).unwrap_or_default(),
                valid,
                support,
            })
        })
        .collect();
    Ok(EvalReport::aggregate(mode, records?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_set_cases() {
        let gold = AnswerValue::Entities(vec!["a".into(), "b".into(), "c".into()]);
        let pred = AnswerValue::Entities(vec!["a".into(), "b".into()]);
        // precision 1, recall 2/3 -> 0.8
        assert!((question_f1(&pred, &gold) - 0.8).abs() < 1e-12);
        assert_eq!(question_f1(&gold, &gold), 1.0);
        assert_eq!(question_f1(&AnswerValue::empty_entities(), &gold), 0.0);
        assert_eq!(
            question_f1(&AnswerValue::empty_entities(), &AnswerValue::empty_entities()),
            1.0
        );
        assert_eq!(question_f1(&AnswerValue::Count(3), &gold), 0.0);
        assert_eq!(question_f1(&AnswerValue::Count(3), &AnswerValue::Count(3)), 1.0);
        assert_eq!(
            question_f1(
                &AnswerValue::Bools(vec![true, false]),
                &AnswerValue::Bools(vec![true, true])
            ),
            0.5
        );
    }

    fn record(category: Category, f1: f64) -> QuestionRecord {
        QuestionRecord {
            id: format!("{}-{f1}", category.name()),
            category,
            predicted: AnswerValue::Count(1),
            f1,
            program: String::new(),
            valid: true,
            support: Vec::new(),
        }
    }

    #[test]
    fn aggregation_hand_fixture() {
        // Two simple questions (1.0, 0.5), one logical (0.0), one count (1.0):
        // micro = 2.5/4, macro = mean(0.75, 0.0, 1.0).
        let records = vec![
            record(Category::Simple, 1.0),
            record(Category::Simple, 0.5),
            record(Category::Logical, 0.0),
            record(Category::QuantitativeCount, 1.0),
        ];
        let report = EvalReport::aggregate(EvalMode::Frozen, records);
        assert!((report.micro_f1 - 0.625).abs() < 1e-12);
        assert!((report.macro_f1 - (0.75 + 0.0 + 1.0) / 3.0).abs() < 1e-12);
        assert_eq!(report.per_category_f1.len(), 3);
        assert!((report.per_category_f1["simple"] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn micro_equals_mean_of_records() {
        let records: Vec<QuestionRecord> = (0..7)
            .map(|i| record(Category::ALL[i % 7], (i as f64) / 7.0))
            .collect();
        let report = EvalReport::aggregate(EvalMode::Frozen, records);
        let mean = report.records.iter().map(|r| r.f1).sum::<f64>() / report.records.len() as f64;
        assert!((report.micro_f1 - mean).abs() < 1e-12);
        let all_ones = report
            .per_category_f1
            .values()
            .sum::<f64>()
            / report.per_category_f1.len() as f64;
        assert!((report.macro_f1 - all_ones).abs() < 1e-12);
    }

    #[test]
    fn report_round_trips_losslessly() {
        let records = vec![record(Category::Comparative, 1.0 / 3.0)];
        let report = EvalReport::aggregate(EvalMode::Adapted, records);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        report.save(&path).unwrap();
        let loaded = EvalReport::load(&path).unwrap();
        assert_eq!(loaded.micro_f1.to_bits(), report.micro_f1.to_bits());
        assert_eq!(loaded.records[0].f1.to_bits(), report.records[0].f1.to_bits());
        assert_eq!(loaded.records[0].id, report.records[0].id);
    }
}

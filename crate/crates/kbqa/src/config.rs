//! Configuration for generation, training, and evaluation.
//!
//! Everything lives in one TOML document with `[experiment]` and
//! `[training]` sections; every field has a default, so a config file only
//! needs the keys it overrides, and CLI flags override the file in turn.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Category;
use crate::policy::{AdamConfig, ModelConfig};

/// How the outer meta-update moves the shared initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OuterUpdate {
    /// Move toward the post-adaptation parameters: θ += η2 · mean(θ'' − θ).
    #[default]
    Reptile,
    /// Apply the meta-test gradient directly: θ += η2 · mean(∇J(θ')).
    FirstOrderMaml,
}

/// Hyperparameters for every learning procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    /// Inner (adaptation) step size.
    pub eta1: f64,
    /// Outer (meta) step size.
    pub eta2: f64,
    /// Trajectories sampled per support question.
    pub k: usize,
    /// Trajectories sampled for the meta-test question.
    pub k_prime: usize,
    /// Support-set size.
    pub n_support: usize,
    /// Word-alignment threshold for the retriever.
    pub sim_threshold: f64,
    /// Maximum decoded tokens per program.
    pub max_decode_len: usize,
    /// Tasks per outer iteration.
    pub batch_tasks: usize,
    /// Passes over the annotated set during teacher forcing.
    pub pretrain_epochs: usize,
    /// Passes over the question set during policy-gradient training.
    pub pg_epochs: usize,
    /// Outer iterations of meta training.
    pub meta_iterations: usize,
    /// Outer update rule.
    pub outer_update: OuterUpdate,
    /// Subtract a moving-average reward baseline in policy-gradient training.
    pub use_reward_baseline: bool,
    /// Decay of that moving average.
    pub baseline_decay: f64,
    /// Adam (used by teacher forcing and policy-gradient training only).
    pub adam_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Model shape.
    pub d_emb: usize,
    pub d_h: usize,
    pub entity_slots: usize,
    pub relation_slots: usize,
    pub type_slots: usize,
    pub int_literals: usize,
    /// Checkpoint cadence in outer iterations (0 = only at the end).
    pub checkpoint_every: usize,
    /// Master seed for all randomized procedures.
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            eta1: 1e-4,
            eta2: 0.1,
            k: 5,
            k_prime: 5,
            n_support: 5,
            sim_threshold: 0.85,
            max_decode_len: 16,
            batch_tasks: 1,
            pretrain_epochs: 30,
            pg_epochs: 3,
            meta_iterations: 200,
            outer_update: OuterUpdate::Reptile,
            use_reward_baseline: false,
            baseline_decay: 0.9,
            adam_lr: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            d_emb: 50,
            d_h: 128,
            entity_slots: 3,
            relation_slots: 2,
            type_slots: 2,
            int_literals: 10,
            checkpoint_every: 0,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            d_emb: self.d_emb,
            d_h: self.d_h,
            entity_slots: self.entity_slots,
            relation_slots: self.relation_slots,
            type_slots: self.type_slots,
            int_literals: self.int_literals,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.adam_lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

/// Synthetic world and dataset sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_types: usize,
    pub entities_per_type: usize,
    pub n_relations: usize,
    /// Chance that a subject participates in a relation at all.
    pub participation: f64,
    /// Maximum objects per (subject, relation).
    pub max_fanout: usize,
    pub train_questions: usize,
    pub validation_questions: usize,
    pub test_questions: usize,
    /// Relative category weights (simple, logical, quantitative,
    /// verification, comparative, quantitative_count, comparative_count).
    /// Defaults mirror the skew of the full-scale corpus.
    pub category_weights: [f64; 7],
    /// Retries before a template is declared unsatisfiable.
    pub template_retries: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_types: 6,
            entities_per_type: 30,
            n_relations: 10,
            participation: 0.75,
            max_fanout: 4,
            train_questions: 3000,
            validation_questions: 300,
            test_questions: 700,
            category_weights: [0.512, 0.103, 0.110, 0.048, 0.045, 0.135, 0.047],
            template_retries: 200,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn weight(&self, category: Category) -> f64 {
        let idx = Category::ALL.iter().position(|c| *c == category).unwrap();
        self.category_weights[idx]
    }
}

/// One config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Config {
    pub experiment: ExperimentConfig,
    pub training: TrainingConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse config {path}: {source}")]
    Parse {
        path: String,
        source: Box<toml::de::Error>,
    },
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source: Box::new(source),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let t = TrainingConfig::default();
        assert_eq!(t.eta1, 1e-4);
        assert_eq!(t.eta2, 0.1);
        assert_eq!(t.k, 5);
        assert_eq!(t.k_prime, 5);
        assert_eq!(t.n_support, 5);
        assert_eq!(t.sim_threshold, 0.85);
        assert_eq!(t.d_emb, 50);
        assert_eq!(t.d_h, 128);
        assert_eq!(t.outer_update, OuterUpdate::Reptile);
        assert!(!t.use_reward_baseline);
    }

    #[test]
    fn partial_toml_overrides_defaults() {
        let doc = "[training]\neta1 = 0.01\nk = 2\n\n[experiment]\nn_types = 3\n";
        let cfg: Config = toml::from_str(doc).unwrap();
        assert_eq!(cfg.training.eta1, 0.01);
        assert_eq!(cfg.training.k, 2);
        assert_eq!(cfg.training.eta2, 0.1); // default retained
        assert_eq!(cfg.experiment.n_types, 3);
        assert_eq!(cfg.experiment.n_relations, 10);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = Config::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: Config = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}

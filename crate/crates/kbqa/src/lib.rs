//! Program induction for complex question answering over a knowledge base.
//!
//! A seq2seq policy (the *programmer*) maps a question plus its KB artifacts
//! to an executable action sequence; a deterministic *interpreter* runs the
//! sequence on a typed triple store and scores the answer with a partial
//! reward. Training combines search-based pseudo-gold pretraining, REINFORCE
//! policy gradients, and retrieval-based meta-RL that adapts the policy to
//! each question from its most similar neighbors.
//!
//! Start with the runnable examples (`cargo run --example ...`) or the `kbqa`
//! binary, which exposes the full pipeline as subcommands.

pub mod commands;
pub mod config;
pub mod data;
pub mod eval;
pub mod generator;
pub mod interpreter;
pub mod kb;
pub mod policy;
pub mod retriever;
pub mod trainer;
pub mod program;

pub use data::{AnnotatedSample, ArtifactTable, Category, Sample};
pub use interpreter::{execute, reward, AnswerValue};
pub use kb::{EntityMap, EntitySet, KnowledgeBase};
pub use policy::{ModelConfig, Programmer, Trajectory};
pub use program::{Action, Operator, Program};

//! Question samples and dataset files.
//!
//! A sample couples a tokenized question with the KB artifacts it mentions,
//! the gold answer, and (when the generator produced it) the gold program.
//! Datasets are line-delimited JSON, one sample per line, so splits stream
//! and diff cleanly.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interpreter::AnswerValue;
use crate::program::Program;

/// The seven question categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "simple")]
    Simple,
    #[serde(rename = "logical")]
    Logical,
    #[serde(rename = "quantitative")]
    Quantitative,
    #[serde(rename = "verification")]
    Verification,
    #[serde(rename = "comparative")]
    Comparative,
    #[serde(rename = "quantitative_count")]
    QuantitativeCount,
    #[serde(rename = "comparative_count")]
    ComparativeCount,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Simple,
        Category::Logical,
        Category::Quantitative,
        Category::Verification,
        Category::Comparative,
        Category::QuantitativeCount,
        Category::ComparativeCount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Simple => "simple",
            Category::Logical => "logical",
            Category::Quantitative => "quantitative",
            Category::Verification => "verification",
            Category::Comparative => "comparative",
            Category::QuantitativeCount => "quantitative_count",
            Category::ComparativeCount => "comparative_count",
        }
    }
}

/// The KB identifiers a question mentions, by kind, in mention order.
/// Slot tokens in the output vocabulary index into these lists.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactTable {
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub types: Vec<String>,
}

impl ArtifactTable {
    pub fn contains(&self, token: &str) -> bool {
        self.entities.iter().any(|e| e == token)
            || self.relations.iter().any(|r| r == token)
            || self.types.iter().any(|t| t == token)
    }
}

/// One question: tokens, artifacts, gold answer, and optionally the
/// generator's gold program (hidden from training; used for verification).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub category: Category,
    pub question_tokens: Vec<String>,
    pub artifacts: ArtifactTable,
    pub gold_answer: AnswerValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_program: Option<Program>,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: bad record: {source}")]
    BadRecord {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_samples(path: &Path) -> Result<Vec<Sample>, DataError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = serde_json::from_str(&line).map_err(|source| DataError::BadRecord {
            path: path.display().to_string(),
            line: idx + 1,
            source,
        })?;
        samples.push(sample);
    }
    Ok(samples)
}

pub fn write_samples(path: &Path, samples: &[Sample]) -> Result<(), DataError> {
    let mut out = Vec::new();
    for s in samples {
        serde_json::to_writer(&mut out, s).expect("sample serialization cannot fail");
        out.push(b'\n');
    }
    std::fs::write(path, out).map_err(io_err(path))?;
    Ok(())
}

/// A sample with a pseudo-gold program found by search; the program is
/// guaranteed (and re-checked on construction) to execute to the gold answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSample {
    pub sample: Sample,
    pub program: Program,
}

pub fn read_annotated(path: &Path) -> Result<Vec<AnnotatedSample>, DataError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| DataError::BadRecord {
            path: path.display().to_string(),
            line: idx + 1,
            source,
        })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn write_annotated(path: &Path, records: &[AnnotatedSample]) -> Result<(), DataError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("record serialization cannot fail");
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

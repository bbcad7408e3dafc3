//! Unsupervised support-set retrieval.
//!
//! Relevance between two questions is the product of two signals:
//! structural similarity of their KB-artifact counts, and semantic
//! similarity of their content words. The semantic side greedily aligns
//! each query word with its best-cosine partner above a threshold; aligned
//! pairs contribute their similarity, and whatever remains unaligned on
//! either side contributes a dissimilarity penalty.
//!
//! Word vectors come from the policy's input-embedding table (read-only),
//! so retrieval needs no supervision of its own.

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::policy::math::dot;

/// Retrieval view of one question: artifact counts plus embedded content
/// words (KB-artifact mentions excluded, so the two signals stay independent).
#[derive(Debug, Clone)]
pub struct QuestionProfile {
    pub entity_count: usize,
    pub relation_count: usize,
    pub type_count: usize,
    pub content_tokens: Vec<String>,
    /// Raw embedding per content token.
    raw: Vec<Vec<f64>>,
    /// Unit-normalized embedding per content token (zero stays zero).
    unit: Vec<Vec<f64>>,
}

impl QuestionProfile {
    pub fn new(counts: (usize, usize, usize), tokens: Vec<String>, embeddings: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(tokens.len(), embeddings.len());
        let unit = embeddings
            .iter()
            .map(|e| {
                let norm = dot(e, e).sqrt();
                if norm > 0.0 {
                    e.iter().map(|x| x / norm).collect()
                } else {
                    e.clone()
                }
            })
            .collect();
        QuestionProfile {
            entity_count: counts.0,
            relation_count: counts.1,
            type_count: counts.2,
            content_tokens: tokens,
            raw: embeddings,
            unit,
        }
    }

    /// Build from a sample, looking words up in an embedding table.
    pub fn from_sample(sample: &Sample, embed: impl Fn(&str) -> Vec<f64>) -> Self {
        let tokens: Vec<String> = sample
            .question_tokens
            .iter()
            .filter(|t| !sample.artifacts.contains(t))
            .cloned()
            .collect();
        let embeddings = tokens.iter().map(|t| embed(t)).collect();
        Self::new(
            (
                sample.artifacts.entities.len(),
                sample.artifacts.relations.len(),
                sample.artifacts.types.len(),
            ),
            tokens,
            embeddings,
        )
    }
}

fn count_similarity(c1: usize, c2: usize) -> f64 {
    if c1 == 0 && c2 == 0 {
        return 1.0;
    }
    1.0 - (c1 as f64 - c2 as f64).abs() / (c1.max(c2) as f64)
}

/// Structural similarity: the product of per-kind count similarities
/// `1 - |c1 - c2| / max(c1, c2)`, with both-zero counts scoring 1.
pub fn artifact_similarity(a: &QuestionProfile, b: &QuestionProfile) -> f64 {
    count_similarity(a.entity_count, b.entity_count)
        * count_similarity(a.relation_count, b.relation_count)
        * count_similarity(a.type_count, b.type_count)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Semantic similarity of `a` toward `b` (directional: the greedy alignment
/// walks `a`'s tokens in order; a `b` token can be claimed at most once).
/// Alignments above `threshold` sum into the agreement mass; leftover tokens
/// on both sides contribute `max(|r_a|, |r_b|) · (1 - cos(Σ r_a, Σ r_b))`
/// of disagreement. Returns agreement / (agreement + disagreement), or 0
/// when both are 0.
pub fn semantic_similarity(a: &QuestionProfile, b: &QuestionProfile, threshold: f64) -> f64 {
    let mut claimed = vec![false; b.content_tokens.len()];
    let mut matched = vec![false; a.content_tokens.len()];
    let mut agreement = 0.0;
    for (i, ua) in a.unit.iter().enumerate() {
        let mut best = f64::NEG_INFINITY;
        let mut best_j = usize::MAX;
        for (j, ub) in b.unit.iter().enumerate() {
            if claimed[j] {
                continue;
            }
            let c = dot(ua, ub);
            if c > best {
                best = c;
                best_j = j;
            }
        }
        if best_j != usize::MAX && best > threshold {
            agreement += best;
            claimed[best_j] = true;
            matched[i] = true;
        }
    }

    let rest_a: Vec<usize> = (0..a.content_tokens.len()).filter(|&i| !matched[i]).collect();
    let rest_b: Vec<usize> = (0..b.content_tokens.len()).filter(|&j| !claimed[j]).collect();
    let disagreement = if rest_a.is_empty() && rest_b.is_empty() {
        0.0
    } else {
        let dim = a
            .raw
            .first()
            .or(b.raw.first())
            .map(|v| v.len())
            .unwrap_or(0);
        let mut sum_a = vec![0.0; dim];
        for &i in &rest_a {
            for (s, x) in sum_a.iter_mut().zip(&a.raw[i]) {
                *s += x;
            }
        }
        let mut sum_b = vec![0.0; dim];
        for &j in &rest_b {
            for (s, x) in sum_b.iter_mut().zip(&b.raw[j]) {
                *s += x;
            }
        }
        rest_a.len().max(rest_b.len()) as f64 * (1.0 - cosine(&sum_a, &sum_b))
    };

    let total = agreement + disagreement;
    if total == 0.0 {
        0.0
    } else {
        agreement / total
    }
}

/// Full relevance score with the query oriented first.
pub fn relevance(query: &QuestionProfile, candidate: &QuestionProfile, threshold: f64) -> f64 {
    artifact_similarity(query, candidate) * semantic_similarity(query, candidate, threshold)
}

/// One retrieved support question with its relevance score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportItem {
    pub sample: Sample,
    pub score: f64,
}

/// Top-N support questions for one query, sorted by score descending.
/// The query itself (matched by id) is never a member.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SupportSet {
    pub members: Vec<SupportItem>,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SupportItem> {
        self.members.iter()
    }
}

/// Score every candidate against the query and keep the top `n`. Ties keep
/// corpus order. `profiles` must align 1:1 with `corpus`.
pub fn retrieve(
    query: &QuestionProfile,
    query_id: &str,
    corpus: &[Sample],
    profiles: &[QuestionProfile],
    n: usize,
    threshold: f64,
) -> SupportSet {
    debug_assert_eq!(corpus.len(), profiles.len());
    let mut scored: Vec<(usize, f64)> = corpus
        .iter()
        .zip(profiles)
        .enumerate()
        .filter(|(_, (s, _))| s.id != query_id)
        .map(|(i, (_, p))| (i, relevance(query, p, threshold)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("scores are finite"));
    scored.truncate(n);
    SupportSet {
        members: scored
            .into_iter()
            .map(|(i, score)| SupportItem {
                sample: corpus[i].clone(),
                score,
            })
            .collect(),
    }
}

/// Profile an entire corpus against one embedding table.
pub fn build_profiles(corpus: &[Sample], embed: impl Fn(&str) -> Vec<f64>) -> Vec<QuestionProfile> {
    corpus.iter().map(|s| QuestionProfile::from_sample(s, &embed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ArtifactTable, Category};
    use crate::interpreter::AnswerValue;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn profile(counts: (usize, usize, usize)) -> QuestionProfile {
        QuestionProfile::new(counts, vec![], vec![])
    }

    #[test]
    fn artifact_similarity_hand_values() {
        assert_eq!(artifact_similarity(&profile((2, 1, 1)), &profile((1, 1, 1))), 0.5);
        assert_eq!(artifact_similarity(&profile((3, 2, 1)), &profile((3, 2, 1))), 1.0);
        assert_eq!(artifact_similarity(&profile((0, 1, 1)), &profile((0, 1, 1))), 1.0);
        assert_eq!(artifact_similarity(&profile((0, 1, 1)), &profile((2, 1, 1))), 0.0);
    }

    #[test]
    fn artifact_similarity_is_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a = profile((rng.random_range(0..5), rng.random_range(0..5), rng.random_range(0..5)));
            let b = profile((rng.random_range(0..5), rng.random_range(0..5), rng.random_range(0..5)));
            let ab = artifact_similarity(&a, &b);
            let ba = artifact_similarity(&b, &a);
            assert_eq!(ab, ba);
            assert!((0.0..=1.0).contains(&ab));
            let all_match = a.entity_count == b.entity_count
                && a.relation_count == b.relation_count
                && a.type_count == b.type_count;
            assert_eq!(ab == 1.0, all_match);
        }
    }

    #[test]
    fn identical_questions_have_semantic_similarity_one() {
        let tokens = vec!["which".to_string(), "river".to_string(), "flows".to_string()];
        let embeds = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        let a = QuestionProfile::new((1, 1, 1), tokens.clone(), embeds.clone());
        let b = QuestionProfile::new((1, 1, 1), tokens, embeds);
        assert!((semantic_similarity(&a, &b, 0.85) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_questions_score_zero() {
        let a = QuestionProfile::new((0, 0, 0), vec!["x".into()], vec![vec![1.0, 0.0]]);
        let b = QuestionProfile::new((0, 0, 0), vec!["y".into()], vec![vec![0.0, 1.0]]);
        assert_eq!(semantic_similarity(&a, &b, 0.85), 0.0);
    }

    #[test]
    fn three_token_alignment_hand_value() {
        // x1 matches y1 exactly (cos 1); x2 matches y2 at cos 0.96; x3 is left
        // over against an empty remainder, costing 1 · (1 - 0) = 1.
        let a = QuestionProfile::new(
            (0, 0, 0),
            vec!["x1".into(), "x2".into(), "x3".into()],
            vec![vec![1.0, 0.0], vec![0.6, 0.8], vec![0.0, 1.0]],
        );
        let b = QuestionProfile::new(
            (0, 0, 0),
            vec!["y1".into(), "y2".into()],
            vec![vec![1.0, 0.0], vec![0.8, 0.6]],
        );
        let expected = 1.96 / (1.96 + 1.0);
        assert!((semantic_similarity(&a, &b, 0.85) - expected).abs() < 1e-9);
    }

    fn random_sample(rng: &mut ChaCha8Rng, id: usize, words: &[&str]) -> Sample {
        let n_tokens = rng.random_range(2..6);
        let question_tokens: Vec<String> = (0..n_tokens)
            .map(|_| words[rng.random_range(0..words.len())].to_string())
            .collect();
        let artifacts = ArtifactTable {
            entities: (0..rng.random_range(0..3)).map(|i| format!("e{i}")).collect(),
            relations: (0..rng.random_range(1..3)).map(|i| format!("r{i}")).collect(),
            types: (0..rng.random_range(1..3)).map(|i| format!("t{i}")).collect(),
        };
        Sample {
            id: format!("s{id}"),
            category: Category::Simple,
            question_tokens,
            artifacts,
            gold_answer: AnswerValue::Count(1),
            gold_program: None,
        }
    }

    #[test]
    fn retrieve_matches_exhaustive_scoring() {
        let words = ["which", "how", "many", "river", "city", "is", "of", "the"];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut table = std::collections::HashMap::new();
        for w in &words {
            let v: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            table.insert(w.to_string(), v);
        }
        let embed = |w: &str| table.get(w).cloned().unwrap_or_else(|| vec![0.0; 8]);
        let corpus: Vec<Sample> = (0..50).map(|i| random_sample(&mut rng, i, &words)).collect();
        let profiles = build_profiles(&corpus, embed);
        let query = random_sample(&mut rng, 1000, &words);
        let qp = QuestionProfile::from_sample(&query, embed);

        let got = retrieve(&qp, &query.id, &corpus, &profiles, 5, 0.85);

        // Independent oracle: score everything, stable sort, take the prefix.
        let mut oracle: Vec<(usize, f64)> = (0..corpus.len())
            .map(|i| {
                let p = QuestionProfile::from_sample(&corpus[i], embed);
                (i, artifact_similarity(&qp, &p) * semantic_similarity(&qp, &p, 0.85))
            })
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        for (item, (idx, score)) in got.iter().zip(&oracle) {
            assert_eq!(item.sample.id, corpus[*idx].id);
            assert!((item.score - score).abs() < 1e-12);
        }
        assert_eq!(got.len(), 5);
    }

    #[test]
    fn duplicate_of_query_ranks_first_with_score_one() {
        let words = ["which", "river", "flows"];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let embed = |w: &str| {
            let mut h = 0u64;
            for b in w.bytes() {
                h = h.wrapping_mul(31).wrapping_add(b as u64);
            }
            (0..4).map(|i| ((h >> (8 * i)) & 0xff) as f64 / 255.0 + 0.1).collect::<Vec<f64>>()
        };
        let query = random_sample(&mut rng, 0, &words);
        let mut duplicate = query.clone();
        duplicate.id = "dup".into();
        let mut corpus: Vec<Sample> = (1..10).map(|i| random_sample(&mut rng, i, &words)).collect();
        corpus.insert(4, duplicate);
        let profiles = build_profiles(&corpus, embed);
        let qp = QuestionProfile::from_sample(&query, embed);
        let got = retrieve(&qp, &query.id, &corpus, &profiles, 3, 0.85);
        assert_eq!(got.members[0].sample.id, "dup");
        assert!((got.members[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_corpus_returns_everything_sorted() {
        let words = ["a", "b"];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let corpus: Vec<Sample> = (0..3).map(|i| random_sample(&mut rng, i, &words)).collect();
        let embed = |_: &str| vec![1.0, 0.0];
        let profiles = build_profiles(&corpus, embed);
        let query = random_sample(&mut rng, 7, &words);
        let qp = QuestionProfile::from_sample(&query, embed);
        let got = retrieve(&qp, &query.id, &corpus, &profiles, 10, 0.85);
        assert_eq!(got.len(), 3);
        for pair in got.members.windows(2) {
            assert!(pair[0].score >= pair[1].score);
        }
    }

    #[test]
    fn query_itself_is_excluded() {
        let words = ["w"];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let query = random_sample(&mut rng, 0, &words);
        let corpus = vec![query.clone()];
        let embed = |_: &str| vec![1.0];
        let profiles = build_profiles(&corpus, embed);
        let qp = QuestionProfile::from_sample(&query, embed);
        let got = retrieve(&qp, &query.id, &corpus, &profiles, 5, 0.85);
        assert!(got.is_empty());
    }
}

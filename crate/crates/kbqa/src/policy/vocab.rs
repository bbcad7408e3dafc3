//! Token spaces on both sides of the policy.
//!
//! The input side is an open word list built from the KB and the training
//! questions (id 0 is UNK). The output side is closed and positional:
//! END, the twelve operators, entity/relation/type slot tokens that index
//! into a question's artifact table, and small integer literals for the
//! threshold operators. Slot tokens beyond a question's artifact counts are
//! masked to zero probability, so every emitted slot resolves by construction.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::data::{ArtifactTable, Sample};
use crate::kb::KnowledgeBase;
use crate::program::{Action, Operator, Program};

pub const UNK: usize = 0;

/// Input word list. Token 0 is UNK; the rest are sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputVocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl InputVocab {
    /// Collect every KB identifier plus every question token of `samples`.
    pub fn build<'a>(kb: &KnowledgeBase, samples: impl IntoIterator<Item = &'a Sample>) -> Self {
        let mut words: Vec<String> = Vec::new();
        words.extend(kb.entities().map(str::to_owned));
        words.extend(kb.relations().map(str::to_owned));
        words.extend(kb.types().map(str::to_owned));
        for s in samples {
            words.extend(s.question_tokens.iter().cloned());
        }
        words.sort();
        words.dedup();
        let mut tokens = Vec::with_capacity(words.len() + 1);
        tokens.push("<unk>".to_string());
        tokens.extend(words);
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        InputVocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Rebuild the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }
}

/// Shape of the closed output vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub entity_slots: usize,
    pub relation_slots: usize,
    pub type_slots: usize,
    pub int_literals: usize,
}

/// One output token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutToken {
    End,
    Op(Operator),
    /// 0-based index into the question's entity list.
    Ent(usize),
    Rel(usize),
    Typ(usize),
    Int(u64),
}

impl OutputSpec {
    pub const END: usize = 0;
    const OPS: usize = Operator::ALL.len();

    pub fn size(&self) -> usize {
        1 + Self::OPS + self.entity_slots + self.relation_slots + self.type_slots + self.int_literals
    }

    pub fn id(&self, tok: OutToken) -> usize {
        let ents = 1 + Self::OPS;
        let rels = ents + self.entity_slots;
        let typs = rels + self.relation_slots;
        let ints = typs + self.type_slots;
        match tok {
            OutToken::End => Self::END,
            OutToken::Op(op) => 1 + Operator::ALL.iter().position(|o| *o == op).unwrap(),
            OutToken::Ent(i) => {
                debug_assert!(i < self.entity_slots);
                ents + i
            }
            OutToken::Rel(i) => {
                debug_assert!(i < self.relation_slots);
                rels + i
            }
            OutToken::Typ(i) => {
                debug_assert!(i < self.type_slots);
                typs + i
            }
            OutToken::Int(n) => {
                debug_assert!((n as usize) < self.int_literals);
                ints + n as usize
            }
        }
    }

    pub fn token(&self, id: usize) -> OutToken {
        let ents = 1 + Self::OPS;
        let rels = ents + self.entity_slots;
        let typs = rels + self.relation_slots;
        let ints = typs + self.type_slots;
        if id == Self::END {
            OutToken::End
        } else if id < ents {
            OutToken::Op(Operator::ALL[id - 1])
        } else if id < rels {
            OutToken::Ent(id - ents)
        } else if id < typs {
            OutToken::Rel(id - rels)
        } else if id < ints {
            OutToken::Typ(id - typs)
        } else {
            debug_assert!(id < self.size());
            OutToken::Int((id - ints) as u64)
        }
    }

    /// Human-readable token name, for logs.
    pub fn name(&self, id: usize) -> String {
        match self.token(id) {
            OutToken::End => "END".into(),
            OutToken::Op(op) => op.name().into(),
            OutToken::Ent(i) => format!("ENT_{}", i + 1),
            OutToken::Rel(i) => format!("REL_{}", i + 1),
            OutToken::Typ(i) => format!("TYPE_{}", i + 1),
            OutToken::Int(n) => format!("INT_{n}"),
        }
    }

    /// Allowed-token mask for a question: slots beyond the artifact counts
    /// are disallowed; everything else is always available.
    pub fn mask(&self, table: &ArtifactTable) -> Vec<bool> {
        (0..self.size())
            .map(|id| match self.token(id) {
                OutToken::Ent(i) => i < table.entities.len(),
                OutToken::Rel(i) => i < table.relations.len(),
                OutToken::Typ(i) => i < table.types.len(),
                _ => true,
            })
            .collect()
    }

    pub fn fits(&self, table: &ArtifactTable) -> bool {
        table.entities.len() <= self.entity_slots
            && table.relations.len() <= self.relation_slots
            && table.types.len() <= self.type_slots
    }

    /// Convert a program over concrete KB ids into slot-token form, END
    /// included. Fails if an argument is not in the artifact table or an
    /// integer exceeds the literal range.
    pub fn tokenize_program(&self, program: &Program, table: &ArtifactTable) -> Option<Vec<usize>> {
        let ent = |id: &str| table.entities.iter().position(|e| e == id);
        let rel = |id: &str| table.relations.iter().position(|r| r == id);
        let typ = |id: &str| table.types.iter().position(|t| t == id);
        let mut out = Vec::new();
        for action in &program.actions {
            out.push(self.id(OutToken::Op(action.operator())));
            match action {
                Action::Select { entity, relation, ty }
                | Action::Union { entity, relation, ty }
                | Action::Intersection { entity, relation, ty }
                | Action::Difference { entity, relation, ty } => {
                    out.push(self.id(OutToken::Ent(ent(entity)?)));
                    out.push(self.id(OutToken::Rel(rel(relation)?)));
                    out.push(self.id(OutToken::Typ(typ(ty)?)));
                }
                Action::SelectAll { key_type, relation, value_type } => {
                    out.push(self.id(OutToken::Typ(typ(key_type)?)));
                    out.push(self.id(OutToken::Rel(rel(relation)?)));
                    out.push(self.id(OutToken::Typ(typ(value_type)?)));
                }
                Action::Bool { entity } => out.push(self.id(OutToken::Ent(ent(entity)?))),
                Action::GreaterThan { n } | Action::LessThan { n } | Action::EqualTo { n } => {
                    if *n as usize >= self.int_literals {
                        return None;
                    }
                    out.push(self.id(OutToken::Int(*n)));
                }
                Action::Count | Action::ArgMax | Action::ArgMin => {}
            }
        }
        out.push(self.id(OutToken::End));
        Some(out)
    }

    /// Assemble a token sequence (a trailing END is optional) back into a
    /// program over concrete ids. Returns `None` for sequences that do not
    /// form complete actions or whose slots fall outside the table.
    pub fn assemble_program(&self, tokens: &[usize], table: &ArtifactTable) -> Option<Program> {
        fn take_ent(
            spec: &OutputSpec,
            iter: &mut impl Iterator<Item = usize>,
            table: &ArtifactTable,
        ) -> Option<String> {
            match spec.token(iter.next()?) {
                OutToken::Ent(i) => table.entities.get(i).cloned(),
                _ => None,
            }
        }
        fn take_rel(
            spec: &OutputSpec,
            iter: &mut impl Iterator<Item = usize>,
            table: &ArtifactTable,
        ) -> Option<String> {
            match spec.token(iter.next()?) {
                OutToken::Rel(i) => table.relations.get(i).cloned(),
                _ => None,
            }
        }
        fn take_typ(
            spec: &OutputSpec,
            iter: &mut impl Iterator<Item = usize>,
            table: &ArtifactTable,
        ) -> Option<String> {
            match spec.token(iter.next()?) {
                OutToken::Typ(i) => table.types.get(i).cloned(),
                _ => None,
            }
        }

        let mut actions = Vec::new();
        let mut iter = tokens.iter().copied();
        while let Some(id) = iter.next() {
            let op = match self.token(id) {
                OutToken::End => {
                    // END must be the final token.
                    if iter.next().is_some() {
                        return None;
                    }
                    break;
                }
                OutToken::Op(op) => op,
                _ => return None, // argument token outside an action
            };
            let action = match op {
                Operator::Select | Operator::Union | Operator::Intersection | Operator::Difference => {
                    let entity = take_ent(self, &mut iter, table)?;
                    let relation = take_rel(self, &mut iter, table)?;
                    let ty = take_typ(self, &mut iter, table)?;
                    match op {
                        Operator::Select => Action::Select { entity, relation, ty },
                        Operator::Union => Action::Union { entity, relation, ty },
                        Operator::Intersection => Action::Intersection { entity, relation, ty },
                        _ => Action::Difference { entity, relation, ty },
                    }
                }
                Operator::SelectAll => {
                    let key_type = take_typ(self, &mut iter, table)?;
                    let relation = take_rel(self, &mut iter, table)?;
                    let value_type = take_typ(self, &mut iter, table)?;
                    Action::SelectAll { key_type, relation, value_type }
                }
                Operator::Bool => Action::Bool {
                    entity: take_ent(self, &mut iter, table)?,
                },
                Operator::Count => Action::Count,
                Operator::ArgMax => Action::ArgMax,
                Operator::ArgMin => Action::ArgMin,
                Operator::GreaterThan | Operator::LessThan | Operator::EqualTo => {
                    let n = match self.token(iter.next()?) {
                        OutToken::Int(n) => n,
                        _ => return None,
                    };
                    match op {
                        Operator::GreaterThan => Action::GreaterThan { n },
                        Operator::LessThan => Action::LessThan { n },
                        _ => Action::EqualTo { n },
                    }
                }
            };
            actions.push(action);
        }
        if actions.is_empty() {
            return None;
        }
        Some(Program::new(actions))
    }
}

/// A question prepared for the encoder: its words concatenated with the
/// serialized artifact ids, plus the artifact table and output mask.
#[derive(Debug, Clone)]
pub struct InputSequence {
    pub tokens: Vec<usize>,
    pub table: ArtifactTable,
    pub mask: Vec<bool>,
}

impl InputSequence {
    pub fn build(vocab: &InputVocab, spec: &OutputSpec, sample: &Sample) -> Option<InputSequence> {
        if !spec.fits(&sample.artifacts) {
            return None;
        }
        let table = sample.artifacts.clone();
        let mut tokens: Vec<usize> = sample
            .question_tokens
            .iter()
            .map(|t| vocab.id(t))
            .collect();
        for id in table
            .entities
            .iter()
            .chain(&table.relations)
            .chain(&table.types)
        {
            tokens.push(vocab.id(id));
        }
        let mask = spec.mask(&table);
        Some(InputSequence {
            tokens,
            table,
            mask,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> OutputSpec {
        OutputSpec {
            entity_slots: 3,
            relation_slots: 2,
            type_slots: 2,
            int_literals: 10,
        }
    }

    fn table() -> ArtifactTable {
        ArtifactTable {
            entities: vec!["China".into(), "India".into()],
            relations: vec!["flow".into()],
            types: vec!["river".into()],
        }
    }

    #[test]
    fn token_id_bijection() {
        let spec = spec();
        for id in 0..spec.size() {
            assert_eq!(spec.id(spec.token(id)), id);
        }
    }

    #[test]
    fn mask_disallows_out_of_table_slots() {
        let spec = spec();
        let mask = spec.mask(&table());
        assert!(mask[spec.id(OutToken::Ent(0))]);
        assert!(mask[spec.id(OutToken::Ent(1))]);
        assert!(!mask[spec.id(OutToken::Ent(2))]);
        assert!(mask[spec.id(OutToken::Rel(0))]);
        assert!(!mask[spec.id(OutToken::Rel(1))]);
        assert!(!mask[spec.id(OutToken::Typ(1))]);
        assert!(mask[spec.id(OutToken::End)]);
        assert!(mask[spec.id(OutToken::Int(9))]);
    }

    #[test]
    fn program_tokens_round_trip() {
        let spec = spec();
        let table = table();
        let p = Program::parse(
            "SELECT(China, flow, river)\nINTERSECTION(India, flow, river)\nCOUNT()",
        )
        .unwrap();
        let tokens = spec.tokenize_program(&p, &table).unwrap();
        assert_eq!(*tokens.last().unwrap(), OutputSpec::END);
        assert_eq!(spec.assemble_program(&tokens, &table).unwrap(), p);
    }

    #[test]
    fn assemble_rejects_garbage() {
        let spec = spec();
        let table = table();
        // A bare argument token cannot start a program.
        let bad = vec![spec.id(OutToken::Ent(0))];
        assert!(spec.assemble_program(&bad, &table).is_none());
        // Truncated action.
        let bad = vec![spec.id(OutToken::Op(Operator::Select)), spec.id(OutToken::Ent(0))];
        assert!(spec.assemble_program(&bad, &table).is_none());
        // Empty.
        assert!(spec.assemble_program(&[], &table).is_none());
        assert!(spec.assemble_program(&[OutputSpec::END], &table).is_none());
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let kb = KnowledgeBase::parse("#type China country\n").unwrap();
        let vocab = InputVocab::build(&kb, []);
        assert_eq!(vocab.id("China") != UNK, true);
        assert_eq!(vocab.id("martian"), UNK);
    }
}

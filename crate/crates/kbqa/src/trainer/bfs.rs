//! Breadth-first search for pseudo-gold programs.
//!
//! Enumerates grammatically valid programs over a sample's own artifacts in
//! canonical order — length ascending, then operator rank, then slot index,
//! with integer literals ascending — executing incrementally, and returns
//! the first program whose answer scores reward 1.0 against the gold answer.

use crate::data::{AnnotatedSample, Sample};
use crate::interpreter::{execute, reward, MachineState};
use crate::kb::KnowledgeBase;
use crate::program::{Action, Operator, Program, StateKind};

/// All instantiations of one operator over the sample's artifacts, in
/// canonical argument order.
fn instantiations(op: Operator, sample: &Sample, max_int: u64) -> Vec<Action> {
    let ents = &sample.artifacts.entities;
    let rels = &sample.artifacts.relations;
    let typs = &sample.artifacts.types;
    let mut out = Vec::new();
    match op {
        Operator::Select | Operator::Union | Operator::Intersection | Operator::Difference => {
            for e in ents {
                for r in rels {
                    for t in typs {
                        let (entity, relation, ty) = (e.clone(), r.clone(), t.clone());
                        out.push(match op {
                            Operator::Select => Action::Select { entity, relation, ty },
                            Operator::Union => Action::Union { entity, relation, ty },
                            Operator::Intersection => Action::Intersection { entity, relation, ty },
                            _ => Action::Difference { entity, relation, ty },
                        });
                    }
                }
            }
        }
        Operator::SelectAll => {
            for t1 in typs {
                for r in rels {
                    for t2 in typs {
                        out.push(Action::SelectAll {
                            key_type: t1.clone(),
                            relation: r.clone(),
                            value_type: t2.clone(),
                        });
                    }
                }
            }
        }
        Operator::Bool => {
            for e in ents {
                out.push(Action::Bool { entity: e.clone() });
            }
        }
        Operator::Count => out.push(Action::Count),
        Operator::ArgMax => out.push(Action::ArgMax),
        Operator::ArgMin => out.push(Action::ArgMin),
        Operator::GreaterThan | Operator::LessThan | Operator::EqualTo => {
            for n in 0..max_int {
                out.push(match op {
                    Operator::GreaterThan => Action::GreaterThan { n },
                    Operator::LessThan => Action::LessThan { n },
                    _ => Action::EqualTo { n },
                });
            }
        }
    }
    out
}

struct Search<'a> {
    sample: &'a Sample,
    kb: &'a KnowledgeBase,
    max_int: u64,
}

impl Search<'_> {
    /// Depth-first extension to exactly `remaining` more actions, visiting
    /// candidates in canonical order (so the first hit is the earliest
    /// program of this length).
    fn extend(
        &self,
        state: &MachineState,
        kind: StateKind,
        prefix: &mut Vec<Action>,
        remaining: usize,
    ) -> Option<Program> {
        for op in Operator::ALL {
            let Some(next_kind) = kind.step(op) else {
                continue;
            };
            for action in instantiations(op, self.sample, self.max_int) {
                let mut next = state.clone();
                if next.apply(&action, self.kb, prefix.len()).is_err() {
                    continue; // identifier missing from the KB: dead branch
                }
                prefix.push(action);
                if remaining == 1 {
                    let answer = next.clone().finish();
                    if reward(&answer, &self.sample.gold_answer) == 1.0 {
                        return Some(Program::new(prefix.clone()));
                    }
                } else if let Some(found) = self.extend(&next, next_kind, prefix, remaining - 1) {
                    return Some(found);
                }
                prefix.pop();
            }
        }
        None
    }
}

/// Find the canonically first program of length at most `max_len` whose
/// execution matches the sample's gold answer exactly; `None` if the search
/// space is exhausted. Integer literals range over `0..max_int`.
pub fn bfs_annotate(
    sample: &Sample,
    kb: &KnowledgeBase,
    max_len: usize,
    max_int: u64,
) -> Option<AnnotatedSample> {
    let search = Search { sample, kb, max_int };
    for length in 1..=max_len {
        let mut prefix = Vec::with_capacity(length);
        if let Some(program) = search.extend(&MachineState::default(), StateKind::Start, &mut prefix, length)
        {
            // Re-check the annotation invariant through the public executor.
            let answer = execute(&program, kb).expect("bfs only builds valid programs");
            debug_assert_eq!(reward(&answer, &sample.gold_answer), 1.0);
            return Some(AnnotatedSample {
                sample: sample.clone(),
                program,
            });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ArtifactTable, Category};
    use crate::interpreter::AnswerValue;

    fn kb() -> KnowledgeBase {
        KnowledgeBase::parse(
            "#type China country\n#type India country\n#type Ganges river\n\
             #type Volga river\n#type Neva river\n\
             China flow Ganges\nChina flow Volga\nIndia flow Ganges\n",
        )
        .unwrap()
    }

    fn sample(answer: AnswerValue) -> Sample {
        Sample {
            id: "s".into(),
            category: Category::Simple,
            question_tokens: vec!["which".into()],
            artifacts: ArtifactTable {
                entities: vec!["China".into(), "India".into()],
                relations: vec!["flow".into()],
                types: vec!["river".into()],
            },
            gold_answer: answer,
            gold_program: None,
        }
    }

    #[test]
    fn single_select_answer_found_at_length_one() {
        let s = sample(AnswerValue::Entities(vec!["Ganges".into(), "Volga".into()]));
        let got = bfs_annotate(&s, &kb(), 3, 10).unwrap();
        assert_eq!(got.program.len(), 1);
        assert_eq!(
            execute(&got.program, &kb()).unwrap(),
            s.gold_answer
        );
    }

    #[test]
    fn unreachable_answer_yields_none() {
        let s = sample(AnswerValue::Entities(vec!["Neva".into()]));
        assert!(bfs_annotate(&s, &kb(), 3, 10).is_none());
    }

    #[test]
    fn shorter_program_wins_even_when_longer_exists() {
        // {Ganges} is reachable as SELECT(India, ...) at length 1 and as
        // an intersection at length 2; length 1 must win.
        let s = sample(AnswerValue::Entities(vec!["Ganges".into()]));
        let got = bfs_annotate(&s, &kb(), 3, 10).unwrap();
        assert_eq!(got.program.len(), 1);
    }

    #[test]
    fn canonical_order_prefers_earliest_slot() {
        // Both candidate entities yield the same set {Ganges} for relation
        // "stream"; the annotator must pick the first-listed entity.
        let kb = KnowledgeBase::parse(
            "#type A country\n#type B country\n#type Ganges river\n\
             A stream Ganges\nB stream Ganges\n",
        )
        .unwrap();
        let s = Sample {
            artifacts: ArtifactTable {
                entities: vec!["A".into(), "B".into()],
                relations: vec!["stream".into()],
                types: vec!["river".into()],
            },
            ..sample(AnswerValue::Entities(vec!["Ganges".into()]))
        };
        let got = bfs_annotate(&s, &kb, 2, 10).unwrap();
        assert_eq!(
            got.program.actions[0],
            Action::Select {
                entity: "A".into(),
                relation: "stream".into(),
                ty: "river".into()
            }
        );
    }

    #[test]
    fn count_answers_are_annotatable() {
        let s = sample(AnswerValue::Count(2));
        let got = bfs_annotate(&s, &kb(), 3, 10).unwrap();
        assert_eq!(execute(&got.program, &kb()).unwrap(), AnswerValue::Count(2));
    }
}

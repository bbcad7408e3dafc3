//! Executes programs against the KB and scores answers.
//!
//! Execution is pure: the machine state lives only inside one [`execute`]
//! call. The reward compares denotations only; it never sees how a program
//! was produced. Answers of different kinds score 0 against each other;
//! entity sets score their Jaccard overlap, integers exact match, and
//! boolean lists the fraction of agreeing positions.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{EntityMap, EntitySet, KnowledgeBase};
use crate::program::{Action, Program, ValidationError};

/// The denotation of a program: an entity set, a count, or a list of booleans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnswerValue {
    #[serde(rename = "entities")]
    Entities(Vec<String>),
    #[serde(rename = "count")]
    Count(u64),
    #[serde(rename = "bools")]
    Bools(Vec<bool>),
}

impl AnswerValue {
    pub fn entity_set(set: &EntitySet) -> Self {
        AnswerValue::Entities(set.iter().map(str::to_owned).collect())
    }

    pub fn empty_entities() -> Self {
        AnswerValue::Entities(Vec::new())
    }

    pub fn as_entity_set(&self) -> Option<EntitySet> {
        match self {
            AnswerValue::Entities(v) => Some(v.iter().map(String::as_str).collect()),
            _ => None,
        }
    }
}

impl fmt::Display for AnswerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerValue::Entities(v) => write!(f, "{{{}}}", v.join(", ")),
            AnswerValue::Count(n) => write!(f, "{n}"),
            AnswerValue::Bools(b) => {
                let words: Vec<&str> = b.iter().map(|x| if *x { "true" } else { "false" }).collect();
                write!(f, "[{}]", words.join(", "))
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("{0}")]
    Invalid(#[from] ValidationError),
    #[error("action {index}: unresolved identifier {id:?} ({kind})")]
    Unresolved {
        index: usize,
        id: String,
        kind: &'static str,
    },
}

impl ExecError {
    pub fn action_index(&self) -> usize {
        match self {
            ExecError::Invalid(e) => e.index(),
            ExecError::Unresolved { index, .. } => *index,
        }
    }
}

/// Working state of one execution; internal to [`execute`].
#[derive(Debug, Clone, Default)]
pub struct MachineState {
    pub working_set: EntitySet,
    pub working_map: Option<EntityMap>,
    pub bool_results: Vec<bool>,
    pub terminal: Option<AnswerValue>,
}

impl MachineState {
    /// Apply one action. The caller is responsible for grammar validity;
    /// this only resolves identifiers and updates the state.
    pub fn apply(&mut self, action: &Action, kb: &KnowledgeBase, index: usize) -> Result<(), ExecError> {
        let check_entity = |id: &str| -> Result<(), ExecError> {
            if kb.contains_entity(id) {
                Ok(())
            } else {
                Err(ExecError::Unresolved { index, id: id.to_string(), kind: "entity" })
            }
        };
        let check_relation = |id: &str| -> Result<(), ExecError> {
            if kb.contains_relation(id) {
                Ok(())
            } else {
                Err(ExecError::Unresolved { index, id: id.to_string(), kind: "relation" })
            }
        };
        let check_type = |id: &str| -> Result<(), ExecError> {
            if kb.contains_type(id) {
                Ok(())
            } else {
                Err(ExecError::Unresolved { index, id: id.to_string(), kind: "type" })
            }
        };
        match action {
            Action::Select { entity, relation, ty } => {
                check_entity(entity)?;
                check_relation(relation)?;
                check_type(ty)?;
                self.working_set = kb.select(entity, relation, ty);
                self.working_map = None;
            }
            Action::Union { entity, relation, ty }
            | Action::Intersection { entity, relation, ty }
            | Action::Difference { entity, relation, ty } => {
                check_entity(entity)?;
                check_relation(relation)?;
                check_type(ty)?;
                let other = kb.select(entity, relation, ty);
                self.working_set = match action {
                    Action::Union { .. } => self.working_set.union(&other),
                    Action::Intersection { .. } => self.working_set.intersection(&other),
                    _ => self.working_set.difference(&other),
                };
            }
            Action::Bool { entity } => {
                check_entity(entity)?;
                self.bool_results.push(self.working_set.contains(entity));
            }
            Action::Count => {
                let n = match &self.working_map {
                    Some(map) => map.len(),
                    None => self.working_set.len(),
                };
                self.terminal = Some(AnswerValue::Count(n as u64));
            }
            Action::SelectAll { key_type, relation, value_type } => {
                check_type(key_type)?;
                check_relation(relation)?;
                check_type(value_type)?;
                self.working_map = Some(kb.select_all(key_type, relation, value_type));
            }
            Action::ArgMax | Action::ArgMin => {
                let map = self.working_map.take().unwrap_or_default();
                let best = match action {
                    Action::ArgMax => map.iter().map(|(_, g)| g.len()).max(),
                    _ => map.iter().map(|(_, g)| g.len()).min(),
                };
                self.working_set = match best {
                    Some(card) => map.keys_where(|c| c == card),
                    None => EntitySet::new(),
                };
            }
            Action::GreaterThan { n } | Action::LessThan { n } | Action::EqualTo { n } => {
                let map = self.working_map.take().unwrap_or_default();
                let n = *n as usize;
                self.working_set = match action {
                    Action::GreaterThan { .. } => map.keys_where(|c| c > n),
                    Action::LessThan { .. } => map.keys_where(|c| c < n),
                    _ => map.keys_where(|c| c == n),
                };
            }
        }
        Ok(())
    }

    /// The answer the machine denotes once all actions have run: the terminal
    /// count if set, else the boolean verdicts if any, else the working set.
    pub fn finish(self) -> AnswerValue {
        if let Some(terminal) = self.terminal {
            terminal
        } else if !self.bool_results.is_empty() {
            AnswerValue::Bools(self.bool_results)
        } else {
            AnswerValue::entity_set(&self.working_set)
        }
    }
}

/// Run `program` on `kb`. Validates first; identifier resolution failures
/// carry the offending action index.
pub fn execute(program: &Program, kb: &KnowledgeBase) -> Result<AnswerValue, ExecError> {
    program.validate()?;
    let mut state = MachineState::default();
    for (index, action) in program.actions.iter().enumerate() {
        state.apply(action, kb, index)?;
    }
    Ok(state.finish())
}

/// Partial reward in [0, 1] between a predicted and a gold answer.
///
/// Different answer kinds score 0. Entity sets take their Jaccard overlap
/// (two empty sets agree exactly: 1). Counts match exactly or score 0.
/// Boolean lists of equal length score the fraction of agreeing positions;
/// unequal lengths score 0.
pub fn reward(predicted: &AnswerValue, gold: &AnswerValue) -> f64 {
    match (predicted, gold) {
        (AnswerValue::Entities(_), AnswerValue::Entities(_)) => {
            let a = predicted.as_entity_set().expect("entity variant");
            let b = gold.as_entity_set().expect("entity variant");
            a.jaccard(&b)
        }
        (AnswerValue::Count(a), AnswerValue::Count(b)) => {
            if a == b {
                1.0
            } else {
                0.0
            }
        }
        (AnswerValue::Bools(a), AnswerValue::Bools(b)) => {
            if a.len() != b.len() {
                return 0.0;
            }
            let agree = a.iter().zip(b).filter(|(x, y)| x == y).count();
            agree as f64 / a.len() as f64
        }
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::KnowledgeBase;

    fn case_study_kb() -> KnowledgeBase {
        KnowledgeBase::parse(
            "#type Sergio_Piacentini person\n\
             #type Antoinette_Sandbach person\n\
             #type Hermine_Mospointner person\n\
             #type assembly_member occupation\n\
             #type football_manager occupation\n\
             #type football_player occupation\n\
             #type Austria political_territory\n\
             #type Valdeobispo political_territory\n\
             Sergio_Piacentini occupation_of football_manager\n\
             Sergio_Piacentini occupation_of football_player\n\
             Antoinette_Sandbach position_held assembly_member\n\
             Hermine_Mospointner country_of_citizenship Austria\n",
        )
        .unwrap()
    }

    #[test]
    fn union_of_two_selections() {
        let kb = case_study_kb();
        let p = Program::parse(
            "SELECT(Sergio_Piacentini, occupation_of, occupation)\n\
             UNION(Antoinette_Sandbach, position_held, occupation)",
        )
        .unwrap();
        let ans = execute(&p, &kb).unwrap();
        assert_eq!(
            ans,
            AnswerValue::Entities(vec![
                "assembly_member".into(),
                "football_manager".into(),
                "football_player".into(),
            ])
        );
    }

    #[test]
    fn citizenship_verification_yields_false_true() {
        let kb = case_study_kb();
        let p = Program::parse(
            "SELECT(Hermine_Mospointner, country_of_citizenship, political_territory)\n\
             BOOL(Valdeobispo)\n\
             BOOL(Austria)",
        )
        .unwrap();
        let ans = execute(&p, &kb).unwrap();
        assert_eq!(ans, AnswerValue::Bools(vec![false, true]));
    }

    #[test]
    fn self_difference_is_empty() {
        let kb = case_study_kb();
        let p = Program::parse(
            "SELECT(Sergio_Piacentini, occupation_of, occupation)\n\
             DIFFERENCE(Sergio_Piacentini, occupation_of, occupation)",
        )
        .unwrap();
        assert_eq!(execute(&p, &kb).unwrap(), AnswerValue::empty_entities());
    }

    #[test]
    fn count_prefers_map_when_active() {
        let kb = KnowledgeBase::parse(
            "#type c1 country\n#type c2 country\n#type r1 river\n#type r2 river\n#type r3 river\n\
             c1 flow r1\nc1 flow r2\nc2 flow r3\n",
        )
        .unwrap();
        let p = Program::parse("SELECT_ALL(country, flow, river)\nCOUNT()").unwrap();
        assert_eq!(execute(&p, &kb).unwrap(), AnswerValue::Count(2));
        let p = Program::parse("SELECT(c1, flow, river)\nCOUNT()").unwrap();
        assert_eq!(execute(&p, &kb).unwrap(), AnswerValue::Count(2));
    }

    #[test]
    fn map_filters_and_extrema() {
        let kb = KnowledgeBase::parse(
            "#type c1 country\n#type c2 country\n#type c3 country\n\
             #type r1 river\n#type r2 river\n#type r3 river\n\
             c1 flow r1\nc1 flow r2\nc1 flow r3\nc2 flow r1\nc2 flow r2\nc3 flow r1\n",
        )
        .unwrap();
        let run = |text: &str| execute(&Program::parse(text).unwrap(), &kb).unwrap();
        assert_eq!(
            run("SELECT_ALL(country, flow, river)\nGREATER_THAN(1)"),
            AnswerValue::Entities(vec!["c1".into(), "c2".into()])
        );
        assert_eq!(
            run("SELECT_ALL(country, flow, river)\nLESS_THAN(2)"),
            AnswerValue::Entities(vec!["c3".into()])
        );
        assert_eq!(
            run("SELECT_ALL(country, flow, river)\nEQUAL_TO(2)"),
            AnswerValue::Entities(vec!["c2".into()])
        );
        assert_eq!(
            run("SELECT_ALL(country, flow, river)\nARGMAX()"),
            AnswerValue::Entities(vec!["c1".into()])
        );
        assert_eq!(
            run("SELECT_ALL(country, flow, river)\nARGMIN()"),
            AnswerValue::Entities(vec!["c3".into()])
        );
    }

    #[test]
    fn unresolved_identifier_reports_action_index() {
        let kb = case_study_kb();
        let p = Program::parse(
            "SELECT(Sergio_Piacentini, occupation_of, occupation)\n\
             UNION(Nobody, occupation_of, occupation)",
        )
        .unwrap();
        let err = execute(&p, &kb).unwrap_err();
        assert_eq!(err.action_index(), 1);
    }

    #[test]
    fn execute_is_deterministic() {
        let kb = case_study_kb();
        let p = Program::parse(
            "SELECT(Sergio_Piacentini, occupation_of, occupation)\n\
             UNION(Antoinette_Sandbach, position_held, occupation)\n\
             COUNT()",
        )
        .unwrap();
        assert_eq!(execute(&p, &kb).unwrap(), execute(&p, &kb).unwrap());
    }

    #[test]
    fn reward_matrix() {
        let ab = AnswerValue::Entities(vec!["A".into(), "B".into()]);
        let a = AnswerValue::Entities(vec!["A".into()]);
        assert_eq!(reward(&ab, &ab), 1.0);
        assert_eq!(reward(&a, &ab), 0.5);
        assert_eq!(reward(&AnswerValue::Count(5), &a), 0.0);
        assert_eq!(
            reward(
                &AnswerValue::Bools(vec![true, false]),
                &AnswerValue::Bools(vec![true, true])
            ),
            0.5
        );
        assert_eq!(reward(&AnswerValue::Count(5), &AnswerValue::Count(5)), 1.0);
        assert_eq!(reward(&AnswerValue::Count(5), &AnswerValue::Count(4)), 0.0);
        assert_eq!(
            reward(
                &AnswerValue::Bools(vec![true]),
                &AnswerValue::Bools(vec![true, true])
            ),
            0.0
        );
        assert_eq!(
            reward(&AnswerValue::empty_entities(), &AnswerValue::empty_entities()),
            1.0
        );
    }
}

//! The action language: programs are ordered action sequences executed by the
//! interpreter against the KB.
//!
//! A program drives a sequential working-set machine. `SELECT`/`SELECT_ALL`
//! load the working set or the working map, combinators fold further
//! selections into the working set, and the remaining operators reduce to
//! booleans, counts, or filtered key sets. [`Program::validate`] checks the
//! grammar; the text form (`SELECT(China, flow, river)`, one action per line)
//! round-trips through [`Program::parse`] / `Display`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Operator tags, in canonical order. This order defines both the output
/// vocabulary layout and the enumeration order of the BFS annotator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Operator {
    Select,
    Union,
    Intersection,
    Difference,
    Count,
    Bool,
    SelectAll,
    ArgMax,
    ArgMin,
    GreaterThan,
    LessThan,
    EqualTo,
}

impl Operator {
    pub const ALL: [Operator; 12] = [
        Operator::Select,
        Operator::Union,
        Operator::Intersection,
        Operator::Difference,
        Operator::Count,
        Operator::Bool,
        Operator::SelectAll,
        Operator::ArgMax,
        Operator::ArgMin,
        Operator::GreaterThan,
        Operator::LessThan,
        Operator::EqualTo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operator::Select => "SELECT",
            Operator::Union => "UNION",
            Operator::Intersection => "INTERSECTION",
            Operator::Difference => "DIFFERENCE",
            Operator::Count => "COUNT",
            Operator::Bool => "BOOL",
            Operator::SelectAll => "SELECT_ALL",
            Operator::ArgMax => "ARGMAX",
            Operator::ArgMin => "ARGMIN",
            Operator::GreaterThan => "GREATER_THAN",
            Operator::LessThan => "LESS_THAN",
            Operator::EqualTo => "EQUAL_TO",
        }
    }

    pub fn from_name(name: &str) -> Option<Operator> {
        Operator::ALL.into_iter().find(|op| op.name() == name)
    }
}

/// One step of a program. Argument identifiers are concrete KB ids; the
/// threshold operators carry an integer literal instead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Select { entity: String, relation: String, ty: String },
    Union { entity: String, relation: String, ty: String },
    Intersection { entity: String, relation: String, ty: String },
    Difference { entity: String, relation: String, ty: String },
    Count,
    Bool { entity: String },
    SelectAll { key_type: String, relation: String, value_type: String },
    ArgMax,
    ArgMin,
    GreaterThan { n: u64 },
    LessThan { n: u64 },
    EqualTo { n: u64 },
}

impl Action {
    pub fn operator(&self) -> Operator {
        match self {
            Action::Select { .. } => Operator::Select,
            Action::Union { .. } => Operator::Union,
            Action::Intersection { .. } => Operator::Intersection,
            Action::Difference { .. } => Operator::Difference,
            Action::Count => Operator::Count,
            Action::Bool { .. } => Operator::Bool,
            Action::SelectAll { .. } => Operator::SelectAll,
            Action::ArgMax => Operator::ArgMax,
            Action::ArgMin => Operator::ArgMin,
            Action::GreaterThan { .. } => Operator::GreaterThan,
            Action::LessThan { .. } => Operator::LessThan,
            Action::EqualTo { .. } => Operator::EqualTo,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Select { entity, relation, ty }
            | Action::Union { entity, relation, ty }
            | Action::Intersection { entity, relation, ty }
            | Action::Difference { entity, relation, ty } => {
                write!(f, "{}({entity}, {relation}, {ty})", self.operator().name())
            }
            Action::SelectAll { key_type, relation, value_type } => {
                write!(f, "SELECT_ALL({key_type}, {relation}, {value_type})")
            }
            Action::Bool { entity } => write!(f, "BOOL({entity})"),
            Action::GreaterThan { n } => write!(f, "GREATER_THAN({n})"),
            Action::LessThan { n } => write!(f, "LESS_THAN({n})"),
            Action::EqualTo { n } => write!(f, "EQUAL_TO({n})"),
            Action::Count | Action::ArgMax | Action::ArgMin => {
                write!(f, "{}()", self.operator().name())
            }
        }
    }
}

/// What kind of value the machine currently holds; drives validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    /// No action executed yet.
    Start,
    /// A working entity set is active.
    Set,
    /// A working entity map is active.
    Map,
    /// COUNT produced a terminal answer; nothing may follow.
    Terminal,
}

impl StateKind {
    /// The state after applying `op`, or `None` if `op` is not applicable.
    pub fn step(self, op: Operator) -> Option<StateKind> {
        use Operator::*;
        match (self, op) {
            (StateKind::Terminal, _) => None,
            // Source operators reset the machine from any live state.
            (_, Select) => Some(StateKind::Set),
            (_, SelectAll) => Some(StateKind::Map),
            (StateKind::Set, Union | Intersection | Difference | Bool) => Some(StateKind::Set),
            (StateKind::Set | StateKind::Map, Count) => Some(StateKind::Terminal),
            (StateKind::Map, ArgMax | ArgMin | GreaterThan | LessThan | EqualTo) => {
                Some(StateKind::Set)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("invalid at action 0: program is empty")]
    Empty,
    #[error("invalid at action {index}: {op} not applicable in {state:?} state")]
    NotApplicable {
        index: usize,
        op: &'static str,
        state: StateKind,
    },
}

impl ValidationError {
    pub fn index(&self) -> usize {
        match self {
            ValidationError::Empty => 0,
            ValidationError::NotApplicable { index, .. } => *index,
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: expected OPERATOR(args...), got {content:?}")]
    Malformed { line: usize, content: String },
    #[error("line {line}: unknown operator {name:?}")]
    UnknownOperator { line: usize, name: String },
    #[error("line {line}: {op} takes {expected} argument(s), got {got}")]
    Arity {
        line: usize,
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: {op} takes an integer literal, got {arg:?}")]
    BadInteger {
        line: usize,
        op: &'static str,
        arg: String,
    },
}

/// An ordered, nonempty action sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Program {
    pub actions: Vec<Action>,
}

impl Program {
    pub fn new(actions: Vec<Action>) -> Self {
        Program { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Grammar check: nonempty, first action loads a set or map, every later
    /// action applicable to the machine state left by its predecessors, and
    /// nothing after a terminal COUNT.
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.actions.is_empty() {
            return Err(ValidationError::Empty);
        }
        let mut state = StateKind::Start;
        for (index, action) in self.actions.iter().enumerate() {
            let op = action.operator();
            state = state.step(op).ok_or(ValidationError::NotApplicable {
                index,
                op: op.name(),
                state,
            })?;
        }
        Ok(())
    }

    /// Parse the text form produced by `Display`: one `OPERATOR(arg, ...)` per
    /// line. Blank lines are skipped.
    pub fn parse(text: &str) -> Result<Program, ParseError> {
        let mut actions = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() {
                continue;
            }
            let malformed = || ParseError::Malformed {
                line,
                content: content.to_string(),
            };
            let open = content.find('(').ok_or_else(malformed)?;
            if !content.ends_with(')') {
                return Err(malformed());
            }
            let name = content[..open].trim();
            let op = Operator::from_name(name).ok_or_else(|| ParseError::UnknownOperator {
                line,
                name: name.to_string(),
            })?;
            let inner = &content[open + 1..content.len() - 1];
            let args: Vec<&str> = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner.split(',').map(str::trim).collect()
            };
            let arity_err = |expected: usize| ParseError::Arity {
                line,
                op: op.name(),
                expected,
                got: args.len(),
            };
            let action = match op {
                Operator::Select | Operator::Union | Operator::Intersection | Operator::Difference => {
                    if args.len() != 3 {
                        return Err(arity_err(3));
                    }
                    let (entity, relation, ty) =
                        (args[0].to_string(), args[1].to_string(), args[2].to_string());
                    match op {
                        Operator::Select => Action::Select { entity, relation, ty },
                        Operator::Union => Action::Union { entity, relation, ty },
                        Operator::Intersection => Action::Intersection { entity, relation, ty },
                        _ => Action::Difference { entity, relation, ty },
                    }
                }
                Operator::SelectAll => {
                    if args.len() != 3 {
                        return Err(arity_err(3));
                    }
                    Action::SelectAll {
                        key_type: args[0].to_string(),
                        relation: args[1].to_string(),
                        value_type: args[2].to_string(),
                    }
                }
                Operator::Bool => {
                    if args.len() != 1 {
                        return Err(arity_err(1));
                    }
                    Action::Bool {
                        entity: args[0].to_string(),
                    }
                }
                Operator::Count | Operator::ArgMax | Operator::ArgMin => {
                    if !args.is_empty() {
                        return Err(arity_err(0));
                    }
                    match op {
                        Operator::Count => Action::Count,
                        Operator::ArgMax => Action::ArgMax,
                        _ => Action::ArgMin,
                    }
                }
                Operator::GreaterThan | Operator::LessThan | Operator::EqualTo => {
                    if args.len() != 1 {
                        return Err(arity_err(1));
                    }
                    let n: u64 = args[0].parse().map_err(|_| ParseError::BadInteger {
                        line,
                        op: op.name(),
                        arg: args[0].to_string(),
                    })?;
                    match op {
                        Operator::GreaterThan => Action::GreaterThan { n },
                        Operator::LessThan => Action::LessThan { n },
                        _ => Action::EqualTo { n },
                    }
                }
            };
            actions.push(action);
        }
        Ok(Program { actions })
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, action) in self.actions.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{action}")?;
        }
        Ok(())
    }
}

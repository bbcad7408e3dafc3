//! In-memory typed triple store.
//!
//! The knowledge base is immutable after construction and provides the two
//! primitive retrieval operations the interpreter composes: [`KnowledgeBase::select`]
//! and [`KnowledgeBase::select_all`]. Unknown identifiers never error; they
//! produce empty results so that a syntactically valid but vacuous program
//! still executes to a (low-reward) answer.
//!
//! Identifiers are opaque strings. All internal collections are ordered, so
//! iteration is deterministic (lexicographic).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// A set of entity identifiers, ordered lexicographically.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntitySet {
    members: BTreeSet<String>,
}

impl EntitySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, e: impl Into<String>) {
        self.members.insert(e.into());
    }

    pub fn contains(&self, e: &str) -> bool {
        self.members.contains(e)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(String::as_str)
    }

    pub fn union(&self, other: &EntitySet) -> EntitySet {
        self.members.union(&other.members).cloned().collect()
    }

    pub fn intersection(&self, other: &EntitySet) -> EntitySet {
        self.members.intersection(&other.members).cloned().collect()
    }

    pub fn difference(&self, other: &EntitySet) -> EntitySet {
        self.members.difference(&other.members).cloned().collect()
    }

    /// Jaccard overlap |A ∩ B| / |A ∪ B|; two empty sets count as identical (1).
    pub fn jaccard(&self, other: &EntitySet) -> f64 {
        if self.is_empty() && other.is_empty() {
            return 1.0;
        }
        let inter = self.members.intersection(&other.members).count();
        let uni = self.members.union(&other.members).count();
        inter as f64 / uni as f64
    }
}

impl FromIterator<String> for EntitySet {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        EntitySet {
            members: iter.into_iter().collect(),
        }
    }
}

impl<'a> FromIterator<&'a str> for EntitySet {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        iter.into_iter().map(str::to_owned).collect()
    }
}

impl fmt::Display for EntitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, m) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "}}")
    }
}

/// Entities grouped by a shared subject, as produced by [`KnowledgeBase::select_all`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityMap {
    groups: BTreeMap<String, EntitySet>,
}

impl EntityMap {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&EntitySet> {
        self.groups.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EntitySet)> {
        self.groups.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Keys whose group cardinality satisfies `pred`.
    pub fn keys_where(&self, pred: impl Fn(usize) -> bool) -> EntitySet {
        self.groups
            .iter()
            .filter(|(_, set)| pred(set.len()))
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("line {line}: malformed line: {content:?}")]
    MalformedLine { line: usize, content: String },
    #[error("entity {entity:?} appears in a triple but has no type declaration")]
    UntypedEntity { entity: String },
    #[error("entity {entity:?} declared with two types: {first:?} and {second:?}")]
    ConflictingType {
        entity: String,
        first: String,
        second: String,
    },
    #[error("failed to read KB file: {0}")]
    Io(#[from] std::io::Error),
}

/// Immutable store of typed entities and (subject, relation, object) triples.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    entities: BTreeSet<String>,
    entity_types: BTreeMap<String, String>,
    relations: BTreeSet<String>,
    triples: BTreeSet<(String, String, String)>,
    // (subject, relation) -> objects, for select
    objects: BTreeMap<(String, String), BTreeSet<String>>,
    // type -> entities of that type, for select_all
    by_type: BTreeMap<String, BTreeSet<String>>,
}

impl KnowledgeBase {
    /// Build from explicit triples and a type assignment. Every entity
    /// mentioned in a triple (or in `types`) must have exactly one type.
    pub fn build<T, U>(triples: T, types: U) -> Result<Self, KbError>
    where
        T: IntoIterator<Item = (String, String, String)>,
        U: IntoIterator<Item = (String, String)>,
    {
        let mut kb = KnowledgeBase::default();
        for (entity, ty) in types {
            if let Some(prev) = kb.entity_types.get(&entity) {
                if *prev != ty {
                    return Err(KbError::ConflictingType {
                        entity,
                        first: prev.clone(),
                        second: ty,
                    });
                }
                continue;
            }
            kb.by_type.entry(ty.clone()).or_default().insert(entity.clone());
            kb.entities.insert(entity.clone());
            kb.entity_types.insert(entity, ty);
        }
        for (s, r, o) in triples {
            for e in [&s, &o] {
                if !kb.entity_types.contains_key(e.as_str()) {
                    return Err(KbError::UntypedEntity { entity: e.clone() });
                }
            }
            kb.relations.insert(r.clone());
            kb.objects
                .entry((s.clone(), r.clone()))
                .or_default()
                .insert(o.clone());
            kb.triples.insert((s, r, o));
        }
        Ok(kb)
    }

    /// Parse the flat-file format: one triple per line (`subject relation object`,
    /// whitespace-separated) and type declarations `#type entity type`.
    /// Blank lines are skipped; anything else is rejected with its line number.
    pub fn parse(text: &str) -> Result<Self, KbError> {
        let mut triples = Vec::new();
        let mut types = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields[0] == "#type" {
                if fields.len() != 3 {
                    return Err(KbError::MalformedLine {
                        line,
                        content: content.to_string(),
                    });
                }
                types.push((fields[1].to_string(), fields[2].to_string()));
            } else if fields.len() == 3 && !fields[0].starts_with('#') {
                triples.push((
                    fields[0].to_string(),
                    fields[1].to_string(),
                    fields[2].to_string(),
                ));
            } else {
                return Err(KbError::MalformedLine {
                    line,
                    content: content.to_string(),
                });
            }
        }
        Self::build(triples, types)
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Render in the flat-file format, deterministically (types first, then
    /// triples, both sorted). `parse(render(kb))` reconstructs the same KB.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (e, t) in &self.entity_types {
            out.push_str(&format!("#type {e} {t}\n"));
        }
        for (s, r, o) in &self.triples {
            out.push_str(&format!("{s} {r} {o}\n"));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    /// `{ x : (e, r, x) ∈ triples and type(x) = t }`. Total: unknown ids give ∅.
    pub fn select(&self, e: &str, r: &str, t: &str) -> EntitySet {
        match self.objects.get(&(e.to_string(), r.to_string())) {
            Some(objs) => objs
                .iter()
                .filter(|o| self.entity_types.get(*o).is_some_and(|ty| ty == t))
                .map(String::as_str)
                .collect(),
            None => EntitySet::new(),
        }
    }

    /// Group every subject of type `t1` by its nonempty `select(s, r, t2)` result.
    pub fn select_all(&self, t1: &str, r: &str, t2: &str) -> EntityMap {
        let mut groups = BTreeMap::new();
        if let Some(subjects) = self.by_type.get(t1) {
            for s in subjects {
                let set = self.select(s, r, t2);
                if !set.is_empty() {
                    groups.insert(s.clone(), set);
                }
            }
        }
        EntityMap { groups }
    }

    pub fn contains_entity(&self, e: &str) -> bool {
        self.entities.contains(e)
    }

    pub fn contains_relation(&self, r: &str) -> bool {
        self.relations.contains(r)
    }

    pub fn contains_type(&self, t: &str) -> bool {
        self.by_type.contains_key(t)
    }

    pub fn entity_type(&self, e: &str) -> Option<&str> {
        self.entity_types.get(e).map(String::as_str)
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.entities.iter().map(String::as_str)
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.relations.iter().map(String::as_str)
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.by_type.keys().map(String::as_str)
    }

    pub fn entities_of_type(&self, t: &str) -> impl Iterator<Item = &str> {
        self.by_type
            .get(t)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn triples(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.triples
            .iter()
            .map(|(s, r, o)| (s.as_str(), r.as_str(), o.as_str()))
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> KnowledgeBase {
        KnowledgeBase::parse(
            "#type China country\n\
             #type India country\n\
             #type Ganges river\n\
             #type Brahmaputra river\n\
             #type Volga river\n\
             #type Delhi city\n\
             China flow Ganges\n\
             China flow Brahmaputra\n\
             China flow Delhi\n\
             India flow Ganges\n\
             India capital Delhi\n",
        )
        .unwrap()
    }

    /// Straight scan over all triples, written independently of the index.
    fn select_oracle(kb: &KnowledgeBase, e: &str, r: &str, t: &str) -> EntitySet {
        kb.triples()
            .filter(|(s, rel, o)| *s == e && *rel == r && kb.entity_type(o) == Some(t))
            .map(|(_, _, o)| o)
            .collect()
    }

    #[test]
    fn select_matches_brute_force_scan() {
        let kb = toy();
        for e in ["China", "India", "Ganges", "nope"] {
            for r in ["flow", "capital", "missing"] {
                for t in ["river", "country", "city", "ghost"] {
                    assert_eq!(kb.select(e, r, t), select_oracle(&kb, e, r, t));
                }
            }
        }
        let rivers: EntitySet = ["Ganges", "Brahmaputra"].into_iter().collect();
        assert_eq!(kb.select("China", "flow", "river"), rivers);
    }

    #[test]
    fn select_unknown_ids_yield_empty() {
        let kb = toy();
        assert!(kb.select("China", "borders", "river").is_empty());
        assert!(kb.select("Atlantis", "flow", "river").is_empty());
        assert!(kb.select("China", "flow", "ocean").is_empty());
    }

    #[test]
    fn select_filters_by_object_type() {
        let kb = toy();
        // (China, flow, Delhi) exists but Delhi is a city, not a river.
        assert!(!kb.select("China", "flow", "river").contains("Delhi"));
        assert!(kb.select("China", "flow", "city").contains("Delhi"));
    }

    #[test]
    fn union_over_types_recovers_all_objects() {
        let kb = toy();
        let all_types: Vec<String> = kb.types().map(str::to_owned).collect();
        for e in ["China", "India"] {
            for r in ["flow", "capital"] {
                let mut union = EntitySet::new();
                for t in &all_types {
                    union = union.union(&kb.select(e, r, t));
                }
                let direct: EntitySet = kb
                    .triples()
                    .filter(|(s, rel, _)| *s == e && *rel == r)
                    .map(|(_, _, o)| o)
                    .collect();
                assert_eq!(union, direct);
            }
        }
    }

    #[test]
    fn select_all_agrees_with_select_per_key() {
        let kb = toy();
        let map = kb.select_all("country", "flow", "river");
        assert_eq!(map.len(), 2);
        for (s, group) in map.iter() {
            assert_eq!(*group, kb.select(s, "flow", "river"));
            assert!(!group.is_empty());
        }
        assert!(kb.select_all("ocean", "flow", "river").is_empty());
    }

    #[test]
    fn select_is_idempotent() {
        let kb = toy();
        let a = kb.select("China", "flow", "river");
        let b = kb.select("China", "flow", "river");
        assert_eq!(a, b);
    }

    #[test]
    fn parse_rejects_malformed_lines() {
        let err = KnowledgeBase::parse("#type A t\nA flow\n").unwrap_err();
        match err {
            KbError::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
        assert!(KnowledgeBase::parse("#type A\n").is_err());
        assert!(KnowledgeBase::parse("# comment style\n").is_err());
    }

    #[test]
    fn build_rejects_untyped_and_conflicting() {
        assert!(matches!(
            KnowledgeBase::parse("A flow B\n"),
            Err(KbError::UntypedEntity { .. })
        ));
        assert!(matches!(
            KnowledgeBase::parse("#type A t1\n#type A t2\n"),
            Err(KbError::ConflictingType { .. })
        ));
    }

    #[test]
    fn render_round_trips() {
        let kb = toy();
        let text = kb.render();
        let kb2 = KnowledgeBase::parse(&text).unwrap();
        assert_eq!(text, kb2.render());
    }

    #[test]
    fn jaccard_cases() {
        let a: EntitySet = ["A"].into_iter().collect();
        let ab: EntitySet = ["A", "B"].into_iter().collect();
        assert_eq!(a.jaccard(&ab), 0.5);
        assert_eq!(ab.jaccard(&ab), 1.0);
        assert_eq!(EntitySet::new().jaccard(&EntitySet::new()), 1.0);
    }
}

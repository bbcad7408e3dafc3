//! Seeded synthetic world and question generation.
//!
//! The world is a typed random graph: each relation links one domain type to
//! one range type, and each domain entity participates with a bounded random
//! fanout. Questions are instantiated from per-category templates; the gold
//! program is built first and executed to produce the gold answer, so every
//! sample satisfies `execute(gold_program, kb) == gold_answer` by
//! construction. Generation is single-threaded and deterministic per seed.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::data::{ArtifactTable, Category, Sample};
use crate::interpreter::{execute, AnswerValue};
use crate::kb::KnowledgeBase;
use crate::program::{Action, Program};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("world has no usable relations (all selections empty)")]
    EmptyWorld,
    #[error("could not satisfy template {template:?} ({category:?}) after {retries} retries")]
    Unsatisfiable {
        template: &'static str,
        category: Category,
        retries: usize,
    },
    #[error(transparent)]
    Kb(#[from] crate::kb::KbError),
}

/// Stable 64-bit FNV-1a hash, used to derive per-stream seeds.
pub fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

struct World {
    kb: KnowledgeBase,
    /// (relation, domain type, range type)
    relations: Vec<(String, String, String)>,
}

fn build_world(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<World, GenError> {
    let types: Vec<String> = (0..cfg.n_types).map(|i| format!("kind{i}")).collect();
    let entities: Vec<Vec<String>> = (0..cfg.n_types)
        .map(|t| {
            (0..cfg.entities_per_type)
                .map(|e| format!("kind{t}_e{e:02}"))
                .collect()
        })
        .collect();
    let mut type_decls = Vec::new();
    for (t, ents) in entities.iter().enumerate() {
        for e in ents {
            type_decls.push((e.clone(), types[t].clone()));
        }
    }

    let mut relations = Vec::new();
    let mut triples = Vec::new();
    for r in 0..cfg.n_relations {
        let name = format!("rel{r}");
        let dom = rng.random_range(0..cfg.n_types);
        let mut rngty = rng.random_range(0..cfg.n_types);
        while cfg.n_types > 1 && rngty == dom {
            rngty = rng.random_range(0..cfg.n_types);
        }
        for subject in &entities[dom] {
            if rng.random::<f64>() >= cfg.participation {
                continue;
            }
            let fanout = rng.random_range(1..=cfg.max_fanout.max(1));
            let mut pool: Vec<&String> = entities[rngty].iter().collect();
            for _ in 0..fanout.min(pool.len()) {
                let idx = rng.random_range(0..pool.len());
                let object = pool.swap_remove(idx);
                triples.push((subject.clone(), name.clone(), object.clone()));
            }
        }
        relations.push((name, types[dom].clone(), types[rngty].clone()));
    }

    let kb = KnowledgeBase::build(triples, type_decls)?;
    if relations.iter().all(|(r, d, t)| kb.select_all(d, r, t).is_empty()) {
        return Err(GenError::EmptyWorld);
    }
    Ok(World { kb, relations })
}

/// Largest-remainder allocation of `total` samples over category weights;
/// every category gets at least one sample when `total >= 7`.
fn category_counts(total: usize, weights: &[f64; 7]) -> [usize; 7] {
    let sum: f64 = weights.iter().sum();
    let raw: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts = [0usize; 7];
    let mut assigned = 0;
    for (i, r) in raw.iter().enumerate() {
        counts[i] = r.floor() as usize;
        assigned += counts[i];
    }
    let mut order: Vec<usize> = (0..7).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total - assigned) {
        counts[i] += 1;
    }
    if total >= 7 {
        for i in 0..7 {
            if counts[i] == 0 {
                let donor = (0..7).max_by_key(|&j| counts[j]).unwrap();
                counts[donor] -= 1;
                counts[i] += 1;
            }
        }
    }
    counts
}

struct TemplateCtx<'a> {
    world: &'a World,
    rng: &'a mut ChaCha8Rng,
    max_int: u64,
}

impl TemplateCtx<'_> {
    fn relation(&mut self) -> (String, String, String) {
        self.world.relations.choose(self.rng).cloned().unwrap()
    }

    fn entity_of(&mut self, ty: &str) -> String {
        let all: Vec<&str> = self.world.kb.entities_of_type(ty).collect();
        all[self.rng.random_range(0..all.len())].to_string()
    }

    /// A subject whose selection under (relation, range type) is nonempty.
    fn active_subject(&mut self, rel: &(String, String, String)) -> Option<String> {
        for _ in 0..20 {
            let e = self.entity_of(&rel.1);
            if !self.world.kb.select(&e, &rel.0, &rel.2).is_empty() {
                return Some(e);
            }
        }
        None
    }
}

type TemplateResult = Option<(Vec<String>, ArtifactTable, Program)>;

fn template_simple(ctx: &mut TemplateCtx) -> TemplateResult {
    let rel = ctx.relation();
    let e = ctx.active_subject(&rel)?;
    let tokens = vec![
        "which".into(),
        rel.2.clone(),
        "are".into(),
        rel.0.clone(),
        "of".into(),
        e.clone(),
    ];
    let artifacts = ArtifactTable {
        entities: vec![e.clone()],
        relations: vec![rel.0.clone()],
        types: vec![rel.2.clone()],
    };
    let program = Program::new(vec![Action::Select {
        entity: e,
        relation: rel.0,
        ty: rel.2,
    }]);
    Some((tokens, artifacts, program))
}

/// Two selections over a shared range type, combined by a set operator.
fn template_logical(ctx: &mut TemplateCtx) -> TemplateResult {
    let rel1 = ctx.relation();
    let candidates: Vec<(String, String, String)> = ctx
        .world
        .relations
        .iter()
        .filter(|(_, _, t)| *t == rel1.2)
        .cloned()
        .collect();
    let rel2 = candidates.choose(ctx.rng).cloned()?;
    let e1 = ctx.active_subject(&rel1)?;
    let e2 = ctx.active_subject(&rel2)?;
    if e1 == e2 {
        return None;
    }
    let variant = ctx.rng.random_range(0..3);
    let (word, combine): (&str, fn(String, String, String) -> Action) = match variant {
        0 => ("or", |entity, relation, ty| Action::Union { entity, relation, ty }),
        1 => ("also", |entity, relation, ty| Action::Intersection { entity, relation, ty }),
        _ => ("not", |entity, relation, ty| Action::Difference { entity, relation, ty }),
    };
    let tokens = vec![
        "which".into(),
        rel1.2.clone(),
        "are".into(),
        rel1.0.clone(),
        "of".into(),
        e1.clone(),
        word.into(),
        rel2.0.clone(),
        "of".into(),
        e2.clone(),
    ];
    let mut relations = vec![rel1.0.clone()];
    if rel2.0 != rel1.0 {
        relations.push(rel2.0.clone());
    }
    let artifacts = ArtifactTable {
        entities: vec![e1.clone(), e2.clone()],
        relations,
        types: vec![rel1.2.clone()],
    };
    let program = Program::new(vec![
        Action::Select { entity: e1, relation: rel1.0, ty: rel1.2.clone() },
        combine(e2, rel2.0, rel1.2),
    ]);
    Some((tokens, artifacts, program))
}

fn template_quantitative(ctx: &mut TemplateCtx) -> TemplateResult {
    let rel = ctx.relation();
    let variant = ctx.rng.random_range(0..3);
    let (middle, last): (Vec<String>, Action) = match variant {
        0 => (vec!["the".into(), "most".into()], Action::ArgMax),
        1 => (vec!["the".into(), "fewest".into()], Action::ArgMin),
        _ => {
            let n = ctx.rng.random_range(1..=ctx.max_int.min(4));
            (vec!["exactly".into(), n.to_string()], Action::EqualTo { n })
        }
    };
    let mut tokens = vec!["which".into(), rel.1.clone(), rel.0.clone()];
    tokens.extend(middle);
    tokens.push(rel.2.clone());
    let artifacts = ArtifactTable {
        entities: vec![],
        relations: vec![rel.0.clone()],
        types: vec![rel.1.clone(), rel.2.clone()],
    };
    let program = Program::new(vec![
        Action::SelectAll { key_type: rel.1, relation: rel.0, value_type: rel.2 },
        last,
    ]);
    Some((tokens, artifacts, program))
}

fn template_verification(ctx: &mut TemplateCtx) -> TemplateResult {
    let rel = ctx.relation();
    let e = ctx.active_subject(&rel)?;
    let in_set: Vec<String> = ctx.world.kb.select(&e, &rel.0, &rel.2).iter().map(str::to_owned).collect();
    let two = ctx.rng.random_bool(0.5);
    let mut candidates = Vec::new();
    for _ in 0..if two { 2 } else { 1 } {
        let pick_member = ctx.rng.random_bool(0.5) && !in_set.is_empty();
        let c = if pick_member {
            in_set.choose(ctx.rng).cloned().unwrap()
        } else {
            ctx.entity_of(&rel.2)
        };
        if candidates.contains(&c) || c == e {
            return None;
        }
        candidates.push(c);
    }
    let mut tokens: Vec<String> = vec!["is".into(), candidates[0].clone()];
    if two {
        tokens.push("and".into());
        tokens.push(candidates[1].clone());
    }
    tokens.extend([rel.0.clone(), "of".into(), e.clone()]);
    let mut entities = vec![e.clone()];
    entities.extend(candidates.iter().cloned());
    let artifacts = ArtifactTable {
        entities,
        relations: vec![rel.0.clone()],
        types: vec![rel.2.clone()],
    };
    let mut actions = vec![Action::Select { entity: e, relation: rel.0, ty: rel.2 }];
    for c in candidates {
        actions.push(Action::Bool { entity: c });
    }
    Some((tokens, artifacts, Program::new(actions)))
}

fn template_comparative(ctx: &mut TemplateCtx) -> TemplateResult {
    let rel = ctx.relation();
    let greater = ctx.rng.random_bool(0.5);
    let (word, n, action): (&str, u64, Action) = if greater {
        let n = ctx.rng.random_range(1..ctx.max_int.min(4));
        ("more", n, Action::GreaterThan { n })
    } else {
        let n = ctx.rng.random_range(2..=ctx.max_int.min(4));
        ("less", n, Action::LessThan { n })
    };
    let tokens = vec![
        "which".into(),
        rel.1.clone(),
        rel.0.clone(),
        word.into(),
        "than".into(),
        n.to_string(),
        rel.2.clone(),
    ];
    let artifacts = ArtifactTable {
        entities: vec![],
        relations: vec![rel.0.clone()],
        types: vec![rel.1.clone(), rel.2.clone()],
    };
    let program = Program::new(vec![
        Action::SelectAll { key_type: rel.1, relation: rel.0, value_type: rel.2 },
        action,
    ]);
    Some((tokens, artifacts, program))
}

fn template_quantitative_count(ctx: &mut TemplateCtx) -> TemplateResult {
    let variant = ctx.rng.random_range(0..2);
    if variant == 0 {
        let (mut tokens, artifacts, mut program) = template_simple(ctx)?;
        tokens.splice(0..1, ["how".to_string(), "many".to_string()]);
        program.actions.push(Action::Count);
        Some((tokens, artifacts, program))
    } else {
        let (mut tokens, artifacts, mut program) = template_logical(ctx)?;
        tokens.splice(0..1, ["how".to_string(), "many".to_string()]);
        program.actions.push(Action::Count);
        Some((tokens, artifacts, program))
    }
}

fn template_comparative_count(ctx: &mut TemplateCtx) -> TemplateResult {
    let (mut tokens, artifacts, mut program) = template_comparative(ctx)?;
    tokens.splice(0..1, ["how".to_string(), "many".to_string()]);
    program.actions.push(Action::Count);
    Some((tokens, artifacts, program))
}

/// A generated answer is acceptable when it is nonempty in its kind:
/// entity answers have members, counts are positive, boolean answers exist.
fn acceptable(answer: &AnswerValue) -> bool {
    match answer {
        AnswerValue::Entities(v) => !v.is_empty(),
        AnswerValue::Count(n) => *n > 0,
        AnswerValue::Bools(v) => !v.is_empty(),
    }
}

fn generate_sample(
    world: &World,
    category: Category,
    id: String,
    rng: &mut ChaCha8Rng,
    cfg: &ExperimentConfig,
    max_int: u64,
) -> Result<Sample, GenError> {
    let (template, f): (&'static str, fn(&mut TemplateCtx) -> TemplateResult) = match category {
        Category::Simple => ("simple", template_simple),
        Category::Logical => ("logical", template_logical),
        Category::Quantitative => ("quantitative", template_quantitative),
        Category::Verification => ("verification", template_verification),
        Category::Comparative => ("comparative", template_comparative),
        Category::QuantitativeCount => ("quantitative_count", template_quantitative_count),
        Category::ComparativeCount => ("comparative_count", template_comparative_count),
    };
    for _ in 0..cfg.template_retries {
        let mut ctx = TemplateCtx { world, rng, max_int };
        let Some((tokens, artifacts, program)) = f(&mut ctx) else {
            continue;
        };
        let answer = execute(&program, &world.kb).expect("generated programs are valid");
        if !acceptable(&answer) {
            continue;
        }
        return Ok(Sample {
            id,
            category,
            question_tokens: tokens,
            artifacts,
            gold_answer: answer,
            gold_program: Some(program),
        });
    }
    Err(GenError::Unsatisfiable {
        template,
        category,
        retries: cfg.template_retries,
    })
}

fn generate_split(
    world: &World,
    cfg: &ExperimentConfig,
    split: &str,
    total: usize,
    max_int: u64,
) -> Result<Vec<Sample>, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ stable_hash(split));
    let counts = category_counts(total, &cfg.category_weights);
    let mut samples = Vec::with_capacity(total);
    for (category, &count) in Category::ALL.iter().zip(&counts) {
        for i in 0..count {
            let id = format!("{split}-{}-{i:05}", category.name());
            samples.push(generate_sample(world, *category, id, &mut rng, cfg, max_int)?);
        }
    }
    // Interleave categories deterministically.
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    Ok(order.into_iter().map(|i| samples[i].clone()).collect())
}

/// The generated dataset: the KB plus disjoint train/validation/test splits.
pub struct Dataset {
    pub kb: KnowledgeBase,
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
}

pub fn generate_dataset(cfg: &ExperimentConfig) -> Result<Dataset, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ stable_hash("world"));
    let world = build_world(cfg, &mut rng)?;
    // Integer literals must cover every count a threshold template can use.
    let max_int = (cfg.max_fanout as u64).clamp(1, 9);
    let train = generate_split(&world, cfg, "train", cfg.train_questions, max_int)?;
    let validation = generate_split(&world, cfg, "validation", cfg.validation_questions, max_int)?;
    let test = generate_split(&world, cfg, "test", cfg.test_questions, max_int)?;
    Ok(Dataset {
        kb: world.kb,
        train,
        validation,
        test,
    })
}

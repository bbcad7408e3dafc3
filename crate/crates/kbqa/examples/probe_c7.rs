use kbqa::config::TrainingConfig;
use kbqa::data::read_samples;
use kbqa::eval::{evaluate, EvalMode};
use kbqa::kb::KnowledgeBase;
use kbqa::data::read_annotated;
use kbqa::policy::{InputVocab, Programmer};
use kbqa::trainer::{build_tasks, meta_train, pg_train, pretrain_teacher_forcing};
use std::path::Path;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let pre_epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(12);
    let pg_epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let pg_lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let meta_iters: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(400);
    let seed: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1);

    let dir = Path::new("/tmp/c7");
    let kb = KnowledgeBase::load(&dir.join("kb.txt")).unwrap();
    let train = read_samples(&dir.join("train.jsonl")).unwrap();
    let test = read_samples(&dir.join("test.jsonl")).unwrap();
    let annotated = read_annotated(&dir.join("annotated.jsonl")).unwrap();

    let t0 = Instant::now();
    let vocab = InputVocab::build(&kb, &train);
    let base = TrainingConfig { seed, ..TrainingConfig::default() };
    let mut model = Programmer::init(base.model_config(), vocab, seed);
    let pre_cfg = TrainingConfig { pretrain_epochs: pre_epochs, ..base };
    let st = pretrain_teacher_forcing(&mut model, &annotated, &pre_cfg).unwrap();
    println!("pretrain {} epochs: loss {:.3} -> {:.3} [{:?}]", pre_epochs, st.epoch_losses[0], st.epoch_losses.last().unwrap(), t0.elapsed());

    let t1 = Instant::now();
    let pg_cfg = TrainingConfig { pg_epochs, adam_lr: pg_lr, ..base };
    let pgst = pg_train(&mut model, &train[300..600], &kb, &pg_cfg).unwrap();
    println!("pg {} epochs lr {}: reward {:?} [{:?}]", pg_epochs, pg_lr, pgst.epoch_rewards, t1.elapsed());

    let t2 = Instant::now();
    let frozen = evaluate(&model, &test, &train, &kb, &base, EvalMode::Frozen).unwrap();
    println!("frozen PG: macro {:.4} micro {:.4} [{:?}]", frozen.macro_f1, frozen.micro_f1, t2.elapsed());
    for (c, f) in &frozen.per_category_f1 { println!("   {c:<22} {f:.3}"); }

    let t3 = Instant::now();
    let mut meta_model = model.clone();
    let meta_cfg = TrainingConfig { meta_iterations: meta_iters, ..base };
    let tasks = build_tasks(&train[600..800], &train, &meta_model, &meta_cfg);
    let mut last = 0.0;
    meta_train(&mut meta_model, &tasks, &kb, &meta_cfg, |r, _| last = r.mean_meta_test_reward).unwrap();
    let moved: f64 = meta_model.params.data.iter().zip(&model.params.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    println!("||theta* - theta_pg|| = {moved:.4}");
    println!("meta {} iters on {} tasks: last meta-test reward {:.3} [{:?}]", meta_iters, tasks.len(), last, t3.elapsed());

    let t4 = Instant::now();
    let adapted = evaluate(&meta_model, &test, &train, &kb, &meta_cfg, EvalMode::Adapted).unwrap();
    println!("adapted meta: macro {:.4} micro {:.4} [{:?}]", adapted.macro_f1, adapted.micro_f1, t4.elapsed());
    for (c, f) in &adapted.per_category_f1 { println!("   {c:<22} {f:.3}"); }
    println!("DIFF macro: {:+.4}", adapted.macro_f1 - frozen.macro_f1);
}

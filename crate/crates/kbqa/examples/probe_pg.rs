use kbqa::data::{AnnotatedSample, ArtifactTable, Category, Sample};
use kbqa::config::TrainingConfig;
use kbqa::interpreter::AnswerValue;
use kbqa::kb::KnowledgeBase;
use kbqa::policy::{InputVocab, ModelConfig, Programmer};
use kbqa::program::Program;
use kbqa::trainer::{pg_train, pretrain_teacher_forcing, score_trajectories};

fn main() {
    let kb = KnowledgeBase::parse(
        "#type China country\n#type Ganges river\n#type Volga river\n\
         China flow Ganges\nChina flow Volga\n",
    )
    .unwrap();
    let sample = Sample {
        id: "q".into(),
        category: Category::Simple,
        question_tokens: vec!["which".into(), "river".into(), "flow".into(), "China".into()],
        artifacts: ArtifactTable {
            entities: vec!["China".into()],
            relations: vec!["flow".into()],
            types: vec!["river".into()],
        },
        gold_answer: AnswerValue::Entities(vec!["Ganges".into(), "Volga".into()]),
        gold_program: None,
    };
    for warm_epochs in [80usize, 120] {
        let vocab = InputVocab::build(&kb, [&sample]);
        let mcfg = ModelConfig { d_emb: 8, d_h: 16, entity_slots: 1, relation_slots: 1, type_slots: 1, int_literals: 2, ..ModelConfig::default() };
        let mut m = Programmer::init(mcfg, vocab, 11);
        let annotated = AnnotatedSample { sample: sample.clone(), program: Program::parse("SELECT(China, flow, river)").unwrap() };
        let warm = TrainingConfig { pretrain_epochs: warm_epochs, adam_lr: 1e-2, ..TrainingConfig::default() };
        let st = pretrain_teacher_forcing(&mut m, &[annotated], &warm).unwrap();
        let q = m.input(&sample).unwrap();
        let mut trajs = m.sample(&q, 200, 8, 123).unwrap();
        score_trajectories(&m, &sample, &kb, &mut trajs);
        let mean: f64 = trajs.iter().map(|t| t.reward).sum::<f64>() / trajs.len() as f64;
        let hits = trajs.iter().filter(|t| t.reward > 0.0).count();
    println!("warm {warm_epochs}: final loss {:.3}, sampled mean reward {mean:.3}, hits {hits}/200", st.epoch_losses.last().unwrap());
        let pgc = TrainingConfig { pg_epochs: 300, adam_lr: 1e-2, max_decode_len: 8, seed: 1, ..TrainingConfig::default() };
        let stats = pg_train(&mut m, &[sample.clone()], &kb, &pgc).unwrap();
        let best = stats.epoch_rewards.iter().cloned().fold(0.0, f64::max);
        let last = stats.epoch_rewards.last().unwrap();
        println!("  pg: best {best:.3} last {last:.3} updates {}", stats.updates_applied);
    }
}

use kbqa::config::TrainingConfig;
use kbqa::eval::question_f1;
use kbqa::kb::KnowledgeBase;
use kbqa::data::read_samples;
use kbqa::policy::Programmer;
use kbqa::retriever::build_profiles;
use kbqa::trainer::{adapt, decode_answer, embedder, infer, derive_seed};
use kbqa::generator::stable_hash;
use std::path::Path;

fn main() {
    let dir = Path::new("/tmp/c7");
    let kb = KnowledgeBase::load(&dir.join("kb.txt")).unwrap();
    let train = read_samples(&dir.join("train.jsonl")).unwrap();
    let test = read_samples(&dir.join("test.jsonl")).unwrap();
    let model = Programmer::load(&dir.join("m_pg.json")).unwrap();
    let cfg = TrainingConfig { seed: 1, ..TrainingConfig::default() };
    let profiles = build_profiles(&train, embedder(&model));

    for sample in test.iter().filter(|s| s.id.contains("verification")).take(3) {
        println!("== {} : {}", sample.id, sample.question_tokens.join(" "));
        let seed = derive_seed(cfg.seed, &[stable_hash("eval"), stable_hash(&sample.id)]);
        let inf = infer(&model, sample, &train, &profiles, &kb, &cfg, seed).unwrap();
        println!("support: {:?}", inf.support.iter().map(|i| i.sample.id.as_str()).collect::<Vec<_>>());
        // measure parameter displacement of adaptation
        let adapted = adapt(&model, &inf.support, &kb, &cfg, seed).unwrap();
        let delta: f64 = adapted.params.data.iter().zip(&model.params.data).map(|(a,b)| (a-b)*(a-b)).sum::<f64>().sqrt();
        println!("||theta' - theta|| = {delta:.6}");
        // frozen vs adapted decode + step-level probabilities after the select args
        let q = model.input(sample).unwrap();
        let frozen_tokens = model.greedy_decode(&q, cfg.max_decode_len).unwrap();
        let q2 = adapted.input(sample).unwrap();
        let adapted_tokens = adapted.greedy_decode(&q2, cfg.max_decode_len).unwrap();
        println!("frozen tokens  : {:?}", frozen_tokens.iter().map(|&t| model.out.name(t)).collect::<Vec<_>>());
        println!("adapted tokens : {:?}", adapted_tokens.iter().map(|&t| model.out.name(t)).collect::<Vec<_>>());
        // walk to the step after SELECT args (position 4) and compare END vs BOOL probs
        for (label, m, toks) in [("frozen", &model, &frozen_tokens), ("adapted", &adapted, &adapted_tokens)] {
            let qq = m.input(sample).unwrap();
            let enc = m.encode(&qq).unwrap();
            let mut state = m.initial_state(&enc);
            let mut prev = None;
            for (i, &tok) in toks.iter().enumerate().take(5) {
                let (probs, next) = m.decode_step(prev, &state, &enc).unwrap();
                if i == 4 {
                    // after SELECT e r t
                    let bool_id = 1 + 5; // operator rank of Bool = index 5 -> id 6
                    let end_id = 0;
                    println!("  {label}: step4 p(END)={:.4} p(BOOL)={:.4}", probs[end_id], probs[bool_id]);
                }
                prev = Some(tok);
                state = next;
            }
        }
        let (frozen_ans, _, _) = decode_answer(&model, sample, &kb, &frozen_tokens);
        println!("frozen f1 {:.3} adapted f1 {:.3}", question_f1(&frozen_ans, &sample.gold_answer), question_f1(&inf.answer, &sample.gold_answer));
    }
}

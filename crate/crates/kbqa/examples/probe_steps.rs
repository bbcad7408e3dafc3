use kbqa::config::TrainingConfig;
use kbqa::data::read_samples;
use kbqa::kb::KnowledgeBase;
use kbqa::policy::Programmer;
use std::path::Path;

fn main() {
    let dir = Path::new("/tmp/c7");
    let _kb = KnowledgeBase::load(&dir.join("kb.txt")).unwrap();
    let test = read_samples(&dir.join("test.jsonl")).unwrap();
    let model = Programmer::load(&dir.join("m_pg.json")).unwrap();
    let cfg = TrainingConfig::default();

    for sample in test.iter().filter(|s| s.id.contains("verification")).take(2) {
        println!("== {} : {}", sample.id, sample.question_tokens.join(" "));
        println!("   gold: {}", sample.gold_answer);
        let q = model.input(sample).unwrap();
        let enc = model.encode(&q).unwrap();
        let mut state = model.initial_state(&enc);
        let mut prev = None;
        let toks = model.greedy_decode(&q, cfg.max_decode_len).unwrap();
        println!("   greedy: {}", toks.iter().map(|&t| model.out.name(t)).collect::<Vec<_>>().join(" "));
        for (i, &tok) in toks.iter().enumerate() {
            let (probs, next) = model.decode_step(prev, &state, &enc).unwrap();
            let mut idx: Vec<usize> = (0..probs.len()).collect();
            idx.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap());
            let top: Vec<String> = idx.iter().take(3).map(|&v| format!("{}:{:.3}", model.out.name(v), probs[v])).collect();
            println!("   step{i}: {}", top.join(" "));
            prev = Some(tok);
            state = next;
        }
    }
}

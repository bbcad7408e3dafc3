use kbqa::data::read_annotated;
use kbqa::policy::Programmer;
use std::collections::BTreeMap;
use std::path::Path;

fn main() {
    let dir = Path::new("/tmp/c7");
    let annotated = read_annotated(&dir.join("annotated.jsonl")).unwrap();
    for name in ["m0.json", "m_pg.json"] {
        let model = Programmer::load(&dir.join(name)).unwrap();
        let mut per: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for rec in &annotated {
            let q = model.input(&rec.sample).unwrap();
            let tokens = model.out.tokenize_program(&rec.program, &rec.sample.artifacts).unwrap();
            let lp = model.sequence_logprob(&q, &tokens).unwrap();
            let e = per.entry(rec.sample.category.name()).or_insert((0.0, 0));
            e.0 += -lp / tokens.len() as f64;
            e.1 += 1;
        }
        println!("== {name}");
        for (cat, (sum, n)) in per {
            println!("   {cat:<22} mean CE/token {:.3}  (n={n})", sum / n as f64);
        }
    }
}

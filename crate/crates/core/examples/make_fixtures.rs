//! Regenerates `fixtures/corpus.tsv` and `fixtures/embeddings.txt`.
//!
//! ```text
//! cargo run -p silentalarm --example make_fixtures
//! ```
//!
//! The corpus holds 400 violent and 800 benign phrases sampled from the two
//! bundled grammars. The embedding table is a toy 300-dimensional one: words
//! that only occur in violent phrases lean toward one random direction,
//! words that only occur in benign phrases toward another, and shared words
//! are pure noise.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use silentalarm::app::{augment, AugmentMode};
use silentalarm::jsgf::{parse_grammar, Expansion, Grammar};
use silentalarm::textprep::tokenize;
use silentalarm::Label;

pub const VIOLENT: usize = 400;
pub const BENIGN: usize = 800;
pub const DIM: usize = 300;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn grammar(name: &str) -> Grammar {
    let src = std::fs::read_to_string(fixture_dir().join(name)).expect("grammar file");
    parse_grammar(&src).expect("grammar parses")
}

pub fn corpus_text() -> String {
    let violent = augment(&grammar("violent.gram"), "frase", Label::Violent, AugmentMode::Sample { count: VIOLENT, dedup: true }, 1)
        .expect("violent phrases");
    let benign = augment(&grammar("benign.gram"), "frase", Label::Benign, AugmentMode::Sample { count: BENIGN, dedup: true }, 2)
        .expect("benign phrases");
    assert_eq!((violent.len(), benign.len()), (VIOLENT, BENIGN));
    violent.to_file_string() + &benign.to_file_string()
}

fn words(e: &Expansion, out: &mut Vec<String>) {
    match e {
        Expansion::Terminal(t) => out.extend(tokenize(t)),
        Expansion::RuleRef(_) => {}
        Expansion::Optional(inner) => words(inner, out),
        Expansion::Sequence(items) => items.iter().for_each(|i| words(i, out)),
        Expansion::Alternatives(alts) => alts.iter().for_each(|a| words(&a.expansion, out)),
    }
}

fn vocabulary(g: &Grammar) -> Vec<String> {
    let mut out = Vec::new();
    g.rules.values().for_each(|e| words(e, &mut out));
    out
}

fn unit(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn embeddings_text() -> String {
    // 1 = violent only, 2 = benign only, 3 = both
    let mut class: BTreeMap<String, u8> = BTreeMap::new();
    for w in vocabulary(&grammar("violent.gram")) {
        *class.entry(w).or_default() |= 1;
    }
    for w in vocabulary(&grammar("benign.gram")) {
        *class.entry(w).or_default() |= 2;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let violent_dir = unit(&mut rng);
    let benign_dir = unit(&mut rng);
    let mut out = format!("{} {DIM}\n", class.len());
    for (word, c) in &class {
        let noise = unit(&mut rng);
        let lean: Option<&[f64]> = match c {
            1 => Some(&violent_dir),
            2 => Some(&benign_dir),
            _ => None,
        };
        out.push_str(word);
        for (i, n) in noise.iter().enumerate() {
            let v = 0.8 * n + lean.map_or(0.0, |d| 0.6 * d[i]);
            out.push_str(&format!(" {v:.6}"));
        }
        out.push('\n');
    }
    out
}

#[allow(dead_code)]
fn main() {
    let dir = fixture_dir();
    std::fs::write(dir.join("corpus.tsv"), corpus_text()).expect("write corpus");
    std::fs::write(dir.join("embeddings.txt"), embeddings_text()).expect("write embeddings");
    println!("wrote {}", dir.display());
}

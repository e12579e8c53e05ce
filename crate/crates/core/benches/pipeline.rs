//! Sequential against parallel execution for the batch stages of the
//! embedding pipeline, on the bundled fixture corpus.

use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use silentalarm::corpus::{load_corpus, Label};
use silentalarm::featurize::{embed_batch, EmbeddingTable, FeatureVector};
use silentalarm::par::{self, Execution};
use silentalarm::smote::{nearest_neighbors, smote_traced, SmoteConfig};
use silentalarm::svm::{self, KernelSpec, SvmConfig};
use silentalarm::textprep::{Preprocessor, Token};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

struct Data {
    texts: Vec<String>,
    labels: Vec<Label>,
    tokens: Vec<Vec<Token>>,
    table: EmbeddingTable,
    vectors: Vec<FeatureVector>,
}

fn data() -> Data {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let corpus = load_corpus(dir.join("corpus.tsv")).unwrap();
    let table = EmbeddingTable::load(dir.join("embeddings.txt")).unwrap();
    let pre = Preprocessor::portuguese();
    let texts: Vec<String> = corpus.iter().map(|s| s.text.clone()).collect();
    let labels = corpus.iter().map(|s| s.label).collect();
    let tokens = par::map(Execution::Parallel, &texts, |t| pre.preprocess(t));
    let vectors = embed_batch(Execution::Parallel, &tokens, &table).into_iter().map(|e| e.vector).collect();
    Data { texts, labels, tokens, table, vectors }
}

fn featurize(c: &mut Criterion) {
    let d = data();
    let pre = Preprocessor::portuguese();
    let mut g = c.benchmark_group("featurize");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("preprocess", name), |b| {
            b.iter(|| par::map(exec, black_box(&d.texts), |t| pre.preprocess(t)))
        });
        g.bench_function(BenchmarkId::new("embed", name), |b| {
            b.iter(|| embed_batch(exec, black_box(&d.tokens), &d.table))
        });
    }
    g.finish();
}

fn train(c: &mut Criterion) {
    let d = data();
    let mut g = c.benchmark_group("svm");
    g.sample_size(10);
    let kernel = KernelSpec::Poly { degree: 4, gamma: 1.0 / d.table.dim() as f64, coef0: 1.0 };
    for (name, exec) in MODES {
        let cfg = SvmConfig { kernel, cost: 50.0, execution: exec, ..SvmConfig::default() };
        g.bench_function(BenchmarkId::new("train", name), |b| {
            b.iter(|| svm::train(black_box(&d.vectors), &d.labels, &cfg).unwrap())
        });
    }
    let cfg = SvmConfig { kernel, cost: 50.0, ..SvmConfig::default() };
    let model = svm::train(&d.vectors, &d.labels, &cfg).unwrap();
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("decision_batch", name), |b| {
            b.iter(|| model.decision_batch(exec, black_box(&d.vectors)).unwrap())
        });
    }
    g.finish();
}

fn smote(c: &mut Criterion) {
    let d = data();
    let minority: Vec<FeatureVector> = d
        .vectors
        .iter()
        .zip(&d.labels)
        .filter(|(_, l)| **l == Label::Violent)
        .map(|(v, _)| v.clone())
        .collect();
    let majority = d.labels.len() - minority.len();
    let cfg = SmoteConfig { seed: 1, ..SmoteConfig::default() };
    let mut g = c.benchmark_group("smote");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("neighbors", name), |b| {
            b.iter(|| nearest_neighbors(exec, black_box(&minority), 5))
        });
        g.bench_function(BenchmarkId::new("oversample", name), |b| {
            b.iter(|| smote_traced(exec, black_box(&minority), majority, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, featurize, train, smote);
criterion_main!(benches);

//! Fixed-length numeric sentence representations.
//!
//! Bag-of-words vectors are indexed by a [`Vocabulary`] of stems built on
//! the training partition; embedding vectors are the unweighted mean of
//! pretrained word vectors looked up by surface form.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Execution};
use crate::textprep::Token;

/// Default number of vocabulary columns kept for bag-of-words features.
pub const DEFAULT_MAX_TERMS: usize = 1000;

#[derive(Debug, Error)]
pub enum FeaturizeError {
    #[error("cannot build a vocabulary from an empty training set")]
    EmptyTrainingSet,
    #[error("max_terms must be at least 1")]
    ZeroMaxTerms,
    #[error("embedding file header must be `<vocab_size> <dim>`")]
    BadHeader,
    #[error("embedding file line {0}: wrong number of components")]
    DimensionMismatch(usize),
    #[error("embedding file line {0}: unparsable component")]
    BadValue(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense feature vector. All entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        Self::new(v)
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BowMode {
    /// 1 if the term occurs in the sentence, else 0.
    #[default]
    Boolean,
    /// Raw occurrence count.
    Tf,
    /// Count times `ln(N / d(t))`.
    TfIdf,
}

/// Term columns plus the document frequencies needed for tf-idf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    n_docs: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    n_docs: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        let index = r.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { terms: r.terms, index, doc_freq: r.doc_freq, n_docs: r.n_docs }
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self { terms: v.terms, doc_freq: v.doc_freq, n_docs: v.n_docs }
    }
}

impl Vocabulary {
    /// Keeps the `max_terms` most frequent stems (total occurrences over the
    /// training documents), ties broken lexicographically.
    pub fn build<D, S>(docs: &[D], max_terms: usize) -> Result<Self, FeaturizeError>
    where
        D: AsRef<[S]>,
        S: AsRef<str>,
    {
        if docs.is_empty() {
            return Err(FeaturizeError::EmptyTrainingSet);
        }
        if max_terms == 0 {
            return Err(FeaturizeError::ZeroMaxTerms);
        }
        let mut freq: HashMap<&str, (usize, usize)> = HashMap::new();
        for doc in docs {
            let doc = doc.as_ref();
            for (pos, stem) in doc.iter().enumerate() {
                let stem = stem.as_ref();
                let entry = freq.entry(stem).or_default();
                entry.0 += 1;
                if !doc[..pos].iter().any(|s| s.as_ref() == stem) {
                    entry.1 += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize, usize)> =
            freq.into_iter().map(|(t, (tf, df))| (t, tf, df)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_terms);

        let terms: Vec<String> = ranked.iter().map(|r| r.0.to_string()).collect();
        let doc_freq = ranked.iter().map(|r| r.2).collect();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self { terms, index, doc_freq, n_docs: docs.len() })
    }

    /// Convenience wrapper taking preprocessed token sequences.
    pub fn from_tokens(docs: &[Vec<Token>], max_terms: usize) -> Result<Self, FeaturizeError> {
        let stems: Vec<Vec<&str>> =
            docs.iter().map(|d| d.iter().map(|t| t.stem.as_str()).collect()).collect();
        Self::build(&stems, max_terms)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn column(&self, stem: &str) -> Option<usize> {
        self.index.get(stem).copied()
    }

    pub fn doc_freq(&self, stem: &str) -> Option<usize> {
        self.column(stem).map(|i| self.doc_freq[i])
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// `ln(N / d(t))` for column `col`.
    pub fn idf(&self, col: usize) -> f64 {
        (self.n_docs as f64 / self.doc_freq[col] as f64).ln()
    }

    /// Vectorizes a sentence given as stems. Unknown stems are ignored.
    pub fn vectorize<S: AsRef<str>>(&self, stems: &[S], mode: BowMode) -> FeatureVector {
        let mut v = vec![0.0; self.terms.len()];
        for s in stems {
            if let Some(col) = self.column(s.as_ref()) {
                v[col] += 1.0;
            }
        }
        match mode {
            BowMode::Tf => {}
            BowMode::Boolean => v.iter_mut().for_each(|x| *x = if *x > 0.0 { 1.0 } else { 0.0 }),
            BowMode::TfIdf => {
                for (col, x) in v.iter_mut().enumerate() {
                    if *x > 0.0 {
                        *x *= self.idf(col);
                    }
                }
            }
        }
        FeatureVector::new(v)
    }

    /// True if the sentence hits at least one vocabulary column.
    pub fn covers<S: AsRef<str>>(&self, stems: &[S]) -> bool {
        stems.iter().any(|s| self.index.contains_key(s.as_ref()))
    }
}

/// Serializable description of how a model's features are produced.
///
/// The preprocessing resources are stored inline so that a model file is
/// self-contained; the embedding table is stored by reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerSpec {
    #[serde(flatten)]
    pub kind: FeaturizerKind,
    /// Sorted stop words.
    pub stop_words: Vec<String>,
    /// Stem rules in rule-file syntax; `None` means the identity stemmer.
    pub stem_rules: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FeaturizerKind {
    Bow { mode: BowMode, vocabulary: Vocabulary },
    Embedding { path: String, dim: usize },
}

impl FeaturizerKind {
    pub fn dim(&self) -> usize {
        match self {
            FeaturizerKind::Bow { vocabulary, .. } => vocabulary.len(),
            FeaturizerKind::Embedding { dim, .. } => *dim,
        }
    }
}

pub fn bow_vector(tokens: &[Token], vocab: &Vocabulary, mode: BowMode) -> FeatureVector {
    let stems: Vec<&str> = tokens.iter().map(|t| t.stem.as_str()).collect();
    vocab.vectorize(&stems, mode)
}

/// Pretrained word vectors keyed by lowercase surface form.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self { dim, vectors: HashMap::new() }
    }

    /// Inserts a vector unless the word is already present. Returns whether
    /// it was inserted.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> bool {
        assert_eq!(vector.len(), self.dim, "embedding dimension");
        let word = word.into();
        if self.vectors.contains_key(&word) {
            return false;
        }
        self.vectors.insert(word, vector);
        true
    }

    /// Parses word2vec's text format: a `<vocab_size> <dim>` header, then
    /// `word v1 .. vdim` per line. Duplicate words keep their first vector.
    pub fn parse(text: &str) -> Result<Self, FeaturizeError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(FeaturizeError::BadHeader)?;
        let mut fields = header.split_whitespace();
        let (Some(size), Some(dim), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(FeaturizeError::BadHeader);
        };
        let _size: usize = size.parse().map_err(|_| FeaturizeError::BadHeader)?;
        let dim: usize = dim.parse().map_err(|_| FeaturizeError::BadHeader)?;
        if dim == 0 {
            return Err(FeaturizeError::BadHeader);
        }

        let mut table = Self::new(dim);
        for (i, line) in lines {
            let line_no = i + 1;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let values = parts
                .map(|p| p.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or(FeaturizeError::BadValue(line_no))?;
            if values.len() != dim {
                return Err(FeaturizeError::DimensionMismatch(line_no));
            }
            table.insert(word.to_lowercase(), values);
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeaturizeError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

/// A sentence embedding and whether any token was found in the table.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbedding {
    pub vector: FeatureVector,
    /// Set when no token was in the table and `vector` is all zeros.
    pub coverage_warning: bool,
}

/// Mean of the table vectors of in-table surface forms.
pub fn embed_sentence(tokens: &[Token], table: &EmbeddingTable) -> SentenceEmbedding {
    let mut sum = vec![0.0; table.dim];
    let mut hits = 0usize;
    for t in tokens {
        if let Some(v) = table.get(&t.surface) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            hits += 1;
        }
    }
    if hits == 0 {
        return SentenceEmbedding { vector: FeatureVector::zeros(table.dim), coverage_warning: true };
    }
    let n = hits as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    SentenceEmbedding { vector: FeatureVector::new(sum), coverage_warning: false }
}

/// Batch bag-of-words vectorization.
pub fn bow_batch(exec: Execution, docs: &[Vec<Token>], vocab: &Vocabulary, mode: BowMode) -> Vec<FeatureVector> {
    par::map(exec, docs, |d| bow_vector(d, vocab, mode))
}

/// Batch sentence embedding.
pub fn embed_batch(exec: Execution, docs: &[Vec<Token>], table: &EmbeddingTable) -> Vec<SentenceEmbedding> {
    par::map(exec, docs, |d| embed_sentence(d, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(s: &str) -> Token {
        Token { surface: s.to_string(), stem: s.to_string() }
    }

    #[test]
    fn vocabulary_counts() {
        let docs = vec![vec!["a", "b"], vec!["a"]];
        let v = Vocabulary::build(&docs, 2).unwrap();
        assert_eq!(v.terms(), ["a", "b"]);
        assert_eq!(v.doc_freq("a"), Some(2));
        assert_eq!(v.doc_freq("b"), Some(1));
        assert_eq!(v.n_docs(), 2);
        assert_eq!(Vocabulary::build(&docs, 1).unwrap().terms(), ["a"]);
    }

    #[test]
    fn vocabulary_tie_break_is_lexicographic() {
        let docs = vec![vec!["y", "x"]];
        assert_eq!(Vocabulary::build(&docs, 1).unwrap().terms(), ["x"]);
    }

    #[test]
    fn vocabulary_ranks_by_total_frequency_not_doc_frequency() {
        // z occurs 3 times in one doc, w once in each of two docs.
        let docs = vec![vec!["z", "z", "z", "w"], vec!["w"]];
        let v = Vocabulary::build(&docs, 2).unwrap();
        assert_eq!(v.terms(), ["z", "w"]);
        assert_eq!(v.doc_freq("z"), Some(1));
        assert_eq!(v.doc_freq("w"), Some(2));
    }

    #[test]
    fn vocabulary_errors() {
        let empty: Vec<Vec<&str>> = vec![];
        assert!(matches!(Vocabulary::build(&empty, 5), Err(FeaturizeError::EmptyTrainingSet)));
        assert!(matches!(Vocabulary::build(&[vec!["a"]], 0), Err(FeaturizeError::ZeroMaxTerms)));
    }

    #[test]
    fn bow_modes() {
        let v = Vocabulary::build(&[vec!["a", "b"], vec!["a"]], 2).unwrap();
        let s = [tok("a"), tok("a"), tok("zz")];
        assert_eq!(bow_vector(&s, &v, BowMode::Boolean).as_slice(), [1.0, 0.0]);
        assert_eq!(bow_vector(&s, &v, BowMode::Tf).as_slice(), [2.0, 0.0]);
        // a is in both documents: idf = ln(2/2) = 0
        assert_eq!(bow_vector(&s, &v, BowMode::TfIdf).as_slice(), [0.0, 0.0]);
        let tfidf = bow_vector(&[tok("b")], &v, BowMode::TfIdf);
        assert_eq!(tfidf.as_slice()[0], 0.0);
        assert!((tfidf.as_slice()[1] - 0.693_147_180_559_945_3).abs() < 1e-15);
    }

    #[test]
    fn vocabulary_serde_restores_index() {
        let v = Vocabulary::build(&[vec!["a", "b"], vec!["c"]], 10).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.column("c"), v.column("c"));
    }

    #[test]
    fn embeddings_parse() {
        let t = EmbeddingTable::parse("2 3\nfoo 1 0 0\nbar 0 1 0").unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("bar"), Some(&[0.0, 1.0, 0.0][..]));
    }

    #[test]
    fn embeddings_duplicates_keep_first() {
        let t = EmbeddingTable::parse("2 1\nfoo 1\nfoo 2\n").unwrap();
        assert_eq!(t.get("foo"), Some(&[1.0][..]));
    }

    #[test]
    fn embeddings_errors() {
        assert!(matches!(
            EmbeddingTable::parse("2 3\nfoo 1 0 0\nbar 0 1"),
            Err(FeaturizeError::DimensionMismatch(3))
        ));
        assert!(matches!(EmbeddingTable::parse(""), Err(FeaturizeError::BadHeader)));
        assert!(matches!(EmbeddingTable::parse("three 3\n"), Err(FeaturizeError::BadHeader)));
        assert!(matches!(EmbeddingTable::parse("1 2 3\n"), Err(FeaturizeError::BadHeader)));
        assert!(matches!(EmbeddingTable::parse("1 2\nfoo 1 x\n"), Err(FeaturizeError::BadValue(2))));
    }

    #[test]
    fn sentence_embedding_is_the_mean() {
        let t = EmbeddingTable::parse("2 3\nfoo 1 0 0\nbar 0 1 0").unwrap();
        let one = embed_sentence(&[tok("foo")], &t);
        assert_eq!(one.vector.as_slice(), [1.0, 0.0, 0.0]);
        assert!(!one.coverage_warning);
        let two = embed_sentence(&[tok("foo"), tok("qux"), tok("bar")], &t);
        assert_eq!(two.vector.as_slice(), [0.5, 0.5, 0.0]);
        let none = embed_sentence(&[tok("qux")], &t);
        assert_eq!(none.vector.as_slice(), [0.0, 0.0, 0.0]);
        assert!(none.coverage_warning);
    }

    #[test]
    fn embedding_uses_surface_forms() {
        let t = EmbeddingTable::parse("1 1\nmeninas 4").unwrap();
        let token = Token { surface: "meninas".into(), stem: "menin".into() };
        assert_eq!(embed_sentence(&[token], &t).vector.as_slice(), [4.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn docs_strategy() -> impl Strategy<Value = Vec<Vec<String>>> {
            proptest::collection::vec(proptest::collection::vec("[a-e]", 0..6), 1..8)
        }

        proptest! {
            #[test]
            fn boolean_is_indicator_of_tf(docs in docs_strategy(), probe in proptest::collection::vec("[a-g]", 0..8)) {
                let v = Vocabulary::build(&docs, 3).unwrap();
                let tf = v.vectorize(&probe, BowMode::Tf);
                let b = v.vectorize(&probe, BowMode::Boolean);
                let tfidf = v.vectorize(&probe, BowMode::TfIdf);
                for ((t, b), w) in tf.as_slice().iter().zip(b.as_slice()).zip(tfidf.as_slice()) {
                    prop_assert_eq!(*b, if *t > 0.0 { 1.0 } else { 0.0 });
                    prop_assert!(t.fract() == 0.0 && *t >= 0.0);
                    prop_assert!(*w >= 0.0);
                }
                for t in v.terms() {
                    let df = v.doc_freq(t).unwrap();
                    prop_assert!(df >= 1 && df <= v.n_docs());
                }
            }

            #[test]
            fn embedding_is_order_invariant(mut idx in proptest::collection::vec(0usize..4, 1..6)) {
                let t = EmbeddingTable::parse("3 2\nw0 1.5 -2\nw1 0.25 3\nw2 -7 0.125").unwrap();
                let words = ["w0", "w1", "w2", "oov"];
                let a: Vec<Token> = idx.iter().map(|&i| tok(words[i])).collect();
                idx.reverse();
                let b: Vec<Token> = idx.iter().map(|&i| tok(words[i])).collect();
                let (ea, eb) = (embed_sentence(&a, &t), embed_sentence(&b, &t));
                for (x, y) in ea.vector.as_slice().iter().zip(eb.vector.as_slice()) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }
}

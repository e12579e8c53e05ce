//! Labelled sentence corpora: the line-oriented file format and
//! deterministic stratified splitting.
//!
//! A corpus file is UTF-8 with one record per line:
//!
//! ```text
//! violent<TAB>me entrega tudo agora
//! benign<TAB>bom dia
//! ```
//!
//! Labels are case-insensitive. Empty lines and lines starting with `#`
//! are skipped.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed record on line {0}")]
    MalformedRecord(usize),
    #[error("class {0} has fewer than {1} sentences")]
    ClassTooSmall(Label, usize),
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary risk label. `Violent` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Violent,
    Benign,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Violent, Label::Benign];

    /// `+1` for violent, `-1` for benign.
    pub fn sign(self) -> f64 {
        match self {
            Label::Violent => 1.0,
            Label::Benign => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Violent => "violent",
            Label::Benign => "benign",
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Violent => Label::Benign,
            Label::Benign => Label::Violent,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("violent") {
            Ok(Label::Violent)
        } else if s.eq_ignore_ascii_case("benign") {
            Ok(Label::Benign)
        } else {
            Err(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledSentence {
    pub text: String,
    pub label: Label,
}

impl LabeledSentence {
    /// Returns `None` if the text is blank or spans several lines.
    pub fn new(text: impl Into<String>, label: Label) -> Option<Self> {
        let text = text.into();
        if text.trim().is_empty() || text.contains(['\n', '\r']) {
            return None;
        }
        Some(Self { text, label })
    }
}

/// Per-label sentence totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub violent: usize,
    pub benign: usize,
}

impl ClassCounts {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Violent => self.violent,
            Label::Benign => self.benign,
        }
    }

    fn bump(&mut self, label: Label) {
        match label {
            Label::Violent => self.violent += 1,
            Label::Benign => self.benign += 1,
        }
    }
}

/// An ordered, immutable collection of labelled sentences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    sentences: Vec<LabeledSentence>,
    counts: ClassCounts,
}

impl Corpus {
    pub fn new(sentences: Vec<LabeledSentence>) -> Self {
        let mut counts = ClassCounts::default();
        for s in &sentences {
            counts.bump(s.label);
        }
        Self { sentences, counts }
    }

    pub fn sentences(&self) -> &[LabeledSentence] {
        &self.sentences
    }

    pub fn counts(&self) -> ClassCounts {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledSentence> {
        self.sentences.iter()
    }

    /// Drops exact repeats of (label, text), keeping the first occurrence.
    pub fn dedup(&self) -> Corpus {
        let mut seen = HashSet::new();
        Corpus::new(
            self.sentences
                .iter()
                .filter(|s| seen.insert((s.label, s.text.as_str())))
                .cloned()
                .collect(),
        )
    }

    /// Serializes in the corpus file format, one LF-terminated line per record.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(s.label.as_str());
            out.push('\t');
            out.push_str(&s.text);
            out.push('\n');
        }
        out
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a LabeledSentence;
    type IntoIter = std::slice::Iter<'a, LabeledSentence>;

    fn into_iter(self) -> Self::IntoIter {
        self.sentences.iter()
    }
}

pub fn parse_corpus(text: &str) -> Result<Corpus, CorpusError> {
    let mut sentences = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let line_no = i + 1;
        let (label, body) = line
            .split_once('\t')
            .ok_or(CorpusError::MalformedRecord(line_no))?;
        let label: Label = label
            .trim()
            .parse()
            .map_err(|_| CorpusError::MalformedRecord(line_no))?;
        let sentence =
            LabeledSentence::new(body, label).ok_or(CorpusError::MalformedRecord(line_no))?;
        sentences.push(sentence);
    }
    Ok(Corpus::new(sentences))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let text = fs::read_to_string(path)?;
    parse_corpus(&text)
}

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

/// Splits each class independently: `floor(fraction * n)` sentences
/// (at least one) go to train, the rest to test.
///
/// Selection is a seeded shuffle per class; both halves keep the original
/// corpus order.
pub fn stratified_split(corpus: &Corpus, spec: SplitSpec) -> Result<(Corpus, Corpus), CorpusError> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(CorpusError::BadFraction(f));
    }
    for label in Label::ALL {
        if corpus.counts.get(label) < 2 {
            return Err(CorpusError::ClassTooSmall(label, 2));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut in_train = vec![false; corpus.len()];
    for label in Label::ALL {
        let mut idx: Vec<usize> = corpus
            .sentences
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == label)
            .map(|(i, _)| i)
            .collect();
        let n_train = ((f * idx.len() as f64).floor() as usize).max(1);
        idx.shuffle(&mut rng);
        for &i in &idx[..n_train] {
            in_train[i] = true;
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (s, &t) in corpus.sentences.iter().zip(&in_train) {
        if t {
            train.push(s.clone());
        } else {
            test.push(s.clone());
        }
    }
    Ok((Corpus::new(train), Corpus::new(test)))
}

/// Seeded stratified k-fold assignment. Returns the fold index of each
/// sentence; each class is shuffled and dealt round-robin over the folds.
pub fn stratified_folds(corpus: &Corpus, folds: usize, seed: u64) -> Result<Vec<usize>, CorpusError> {
    for label in Label::ALL {
        if corpus.counts.get(label) < folds.max(2) {
            return Err(CorpusError::ClassTooSmall(label, folds.max(2)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; corpus.len()];
    for label in Label::ALL {
        let mut idx: Vec<usize> = (0..corpus.len())
            .filter(|&i| corpus.sentences[i].label == label)
            .collect();
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    Ok(assignment)
}

//! Tokenization, stop-word filtering and rule-driven suffix stripping.
//!
//! The pipeline order is fixed: [`tokenize`] → [`remove_stop_words`] on
//! surface forms → stem each survivor. Stemmers work on single words, so
//! tokenization has to come first.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Stop list shipped with the crate (Brazilian Portuguese).
pub const DEFAULT_STOPLIST: &str = include_str!("../data/stopwords_pt.txt");
/// Suffix rules shipped with the crate (RSLP subset for Portuguese).
pub const DEFAULT_STEM_RULES: &str = include_str!("../data/rslp_pt.rules");

#[derive(Debug, Error)]
pub enum TextprepError {
    #[error("stem rule file line {line}: {reason}")]
    BadRule { line: usize, reason: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A kept word: its case-folded surface form and its stem.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub stem: String,
}

/// Lowercases, splits on Unicode whitespace and strips punctuation from
/// token edges. Internal punctuation (hyphens, apostrophes) and diacritics
/// are kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopList {
    words: HashSet<String>,
}

impl StopList {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    /// One word per line; `#` starts a comment line.
    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextprepError> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn portuguese() -> Self {
        Self::parse(DEFAULT_STOPLIST)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    /// Words in sorted order.
    pub fn sorted(&self) -> Vec<String> {
        let mut v: Vec<String> = self.words.iter().cloned().collect();
        v.sort();
        v
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn remove_stop_words(tokens: Vec<String>, stops: &StopList) -> Vec<String> {
    tokens.into_iter().filter(|t| !stops.contains(t)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StemRule {
    pub suffix: String,
    pub min_stem_len: usize,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StemPass {
    pub name: String,
    /// Sorted longest suffix first; ties keep file order.
    pub rules: Vec<StemRule>,
}

/// Ordered suffix-stripping passes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StemRules {
    passes: Vec<StemPass>,
}

impl StemRules {
    /// Parses `<pass>;<suffix>;<min_stem_len>;<replacement>` lines. Passes
    /// run in order of first appearance.
    pub fn parse(text: &str) -> Result<Self, TextprepError> {
        let mut passes: Vec<StemPass> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason| TextprepError::BadRule { line: i + 1, reason };
            let fields: Vec<&str> = line.split(';').collect();
            let [pass, suffix, min_len, replacement] = fields[..] else {
                return Err(bad("expected 4 `;`-separated fields"));
            };
            let (pass, suffix, replacement) = (pass.trim(), suffix.trim(), replacement.trim());
            if pass.is_empty() {
                return Err(bad("empty pass name"));
            }
            if suffix.is_empty() {
                return Err(bad("empty suffix"));
            }
            let min_stem_len: usize = min_len.trim().parse().map_err(|_| bad("min_stem_len is not an integer"))?;
            if min_stem_len == 0 {
                return Err(bad("min_stem_len must be at least 1"));
            }
            if replacement.chars().count() > suffix.chars().count() {
                return Err(bad("replacement longer than suffix"));
            }
            let rule = StemRule {
                suffix: suffix.to_lowercase(),
                min_stem_len,
                replacement: replacement.to_lowercase(),
            };
            match passes.iter_mut().find(|p| p.name == pass) {
                Some(p) => p.rules.push(rule),
                None => passes.push(StemPass { name: pass.to_string(), rules: vec![rule] }),
            }
        }
        for p in &mut passes {
            p.rules.sort_by_key(|r| std::cmp::Reverse(r.suffix.chars().count()));
        }
        Ok(Self { passes })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextprepError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn portuguese() -> Self {
        Self::parse(DEFAULT_STEM_RULES).expect("shipped stem rules parse")
    }

    pub fn passes(&self) -> &[StemPass] {
        &self.passes
    }

    /// Canonical rule-file text; parses back to an equal rule set.
    pub fn to_rule_text(&self) -> String {
        let mut out = String::new();
        for pass in &self.passes {
            for r in &pass.rules {
                out.push_str(&format!("{};{};{};{}\n", pass.name, r.suffix, r.min_stem_len, r.replacement));
            }
        }
        out
    }

    /// Applies every pass once, in order. Not idempotent.
    pub fn stem(&self, word: &str) -> String {
        let mut w = word.to_string();
        for pass in &self.passes {
            if let Some(rule) = pass.rules.iter().find(|r| rule_applies(r, &w)) {
                w.truncate(w.len() - rule.suffix.len());
                w.push_str(&rule.replacement);
            }
        }
        w
    }
}

fn rule_applies(rule: &StemRule, word: &str) -> bool {
    word.ends_with(&rule.suffix)
        && word.chars().count() >= rule.suffix.chars().count() + rule.min_stem_len
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stemmer {
    Rules(StemRules),
    /// Leaves words untouched.
    Identity,
}

impl Stemmer {
    pub fn stem(&self, word: &str) -> String {
        match self {
            Stemmer::Rules(r) => r.stem(word),
            Stemmer::Identity => word.to_string(),
        }
    }
}

/// Stop list plus stemmer: everything needed to turn raw text into tokens.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub stops: StopList,
    pub stemmer: Stemmer,
}

impl Preprocessor {
    pub fn new(stops: StopList, stemmer: Stemmer) -> Self {
        Self { stops, stemmer }
    }

    pub fn portuguese() -> Self {
        Self::new(StopList::portuguese(), Stemmer::Rules(StemRules::portuguese()))
    }

    pub fn preprocess(&self, text: &str) -> Vec<Token> {
        remove_stop_words(tokenize(text), &self.stops)
            .into_iter()
            .map(|surface| {
                let stem = self.stemmer.stem(&surface);
                Token { surface, stem }
            })
            .collect()
    }
}

/// Free-function form of [`Preprocessor::preprocess`].
pub fn preprocess(text: &str, stops: &StopList, rules: &StemRules) -> Vec<Token> {
    remove_stop_words(tokenize(text), stops)
        .into_iter()
        .map(|surface| {
            let stem = rules.stem(&surface);
            Token { surface, stem }
        })
        .collect()
}

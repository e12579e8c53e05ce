use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::AppError;
use crate::corpus::{Corpus, Label, LabeledSentence};
use crate::jsgf::{enumerate_phrases, parse_grammar, sample_phrases, sample_unique_phrases, Grammar};

/// Draw budget per requested phrase when sampling without repeats.
const DRAWS_PER_PHRASE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentMode {
    /// Every derivation up to `limit`, repeats removed.
    Enumerate { limit: usize },
    /// `count` random derivations; with `dedup`, distinct phrases only.
    Sample { count: usize, dedup: bool },
}

/// Generates labelled sentences from `rule`.
pub fn augment(g: &Grammar, rule: &str, label: Label, mode: AugmentMode, seed: u64) -> Result<Corpus, AppError> {
    let phrases = match mode {
        AugmentMode::Enumerate { limit } => {
            let mut seen = HashSet::new();
            enumerate_phrases(g, rule, limit)?.into_iter().filter(|p| seen.insert(p.clone())).collect()
        }
        AugmentMode::Sample { count, dedup: false } => sample_phrases(g, rule, count, seed)?,
        AugmentMode::Sample { count, dedup: true } => {
            let found = sample_unique_phrases(g, rule, count, seed, count.saturating_mul(DRAWS_PER_PHRASE))?;
            if found.len() < count {
                log::warn!("only {} distinct phrases found for <{rule}> ({count} requested)", found.len());
            }
            found
        }
    };
    let sentences = phrases
        .into_iter()
        .filter_map(|p| LabeledSentence::new(p, label))
        .collect();
    Ok(Corpus::new(sentences))
}

/// Reads a grammar file, generates phrases and writes them in corpus format.
pub fn cmd_augment(
    grammar_path: &Path,
    rule: &str,
    label: Label,
    mode: AugmentMode,
    seed: u64,
    out_path: &Path,
) -> Result<Corpus, AppError> {
    let src = fs::read_to_string(grammar_path)
        .map_err(|e| AppError::io(format!("reading {}", grammar_path.display()), e))?;
    let g = parse_grammar(&src)?;
    let corpus = augment(&g, rule, label, mode, seed)?;
    fs::write(out_path, corpus.to_file_string())
        .map_err(|e| AppError::io(format!("writing {}", out_path.display()), e))?;
    Ok(corpus)
}

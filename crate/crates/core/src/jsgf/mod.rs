//! A finite subset of the Java Speech Grammar Format, used to generate
//! augmentation phrases by slot filling.
//!
//! Supported: an optional `grammar <name>;` header (a leading `#JSGF ...;`
//! line is skipped), rule definitions `[public] <rule> = expansion ;`,
//! alternatives `|` with optional `/weight/` prefixes, grouping `( )`,
//! optionals `[ ]`, rule references `<rule>`, quoted terminals and `//`
//! line comments. Imports, tags and the `*`/`+` operators are rejected, and
//! rules may not reference themselves directly or indirectly, so every
//! grammar derives a finite set of phrases.

mod generate;
mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

pub use generate::{count_derivations, enumerate_phrases, sample_phrases, sample_unique_phrases};
pub use parser::parse_grammar;

#[derive(Debug, Error, PartialEq)]
pub enum JsgfError {
    #[error("syntax error at {line}:{col}: expected {expected}")]
    SyntaxError { line: usize, col: usize, expected: String },
    #[error("reference to undefined rule <{0}>")]
    UnresolvedRule(String),
    #[error("rule <{0}> is recursive")]
    CyclicRule(String),
    #[error("rule <{0}> is defined twice")]
    DuplicateRule(String),
    #[error("no rule named <{0}>")]
    UnknownRule(String),
    #[error("limit must be at least 1")]
    LimitZero,
    #[error("count must be at least 1")]
    CountZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    /// `/w/` prefix; only used when sampling.
    pub weight: Option<f64>,
    pub expansion: Expansion,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expansion {
    /// One or more words; quoted tokens may contain spaces.
    Terminal(String),
    Sequence(Vec<Expansion>),
    /// At least two alternatives.
    Alternatives(Vec<Alternative>),
    Optional(Box<Expansion>),
    RuleRef(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grammar {
    pub name: Option<String>,
    pub rules: BTreeMap<String, Expansion>,
    pub public_rules: BTreeSet<String>,
}

impl Grammar {
    pub fn rule(&self, name: &str) -> Result<&Expansion, JsgfError> {
        self.rules.get(name).ok_or_else(|| JsgfError::UnknownRule(name.to_string()))
    }

    pub fn is_public(&self, name: &str) -> bool {
        self.public_rules.contains(name)
    }

    /// True if `phrase` (words separated by single spaces) is derivable
    /// from `rule`.
    pub fn derives(&self, rule: &str, phrase: &str) -> Result<bool, JsgfError> {
        let words: Vec<&str> = if phrase.is_empty() { Vec::new() } else { phrase.split(' ').collect() };
        let ends = self.match_from(self.rule(rule)?, &words, 0);
        Ok(ends.contains(&words.len()))
    }

    /// All positions where a derivation of `e` starting at `start` can end.
    fn match_from(&self, e: &Expansion, words: &[&str], start: usize) -> BTreeSet<usize> {
        match e {
            Expansion::Terminal(t) => {
                let mut pos = start;
                for w in t.split_whitespace() {
                    if words.get(pos) != Some(&w) {
                        return BTreeSet::new();
                    }
                    pos += 1;
                }
                BTreeSet::from([pos])
            }
            Expansion::Sequence(items) => {
                let mut frontier = BTreeSet::from([start]);
                for item in items {
                    frontier = frontier.iter().flat_map(|&p| self.match_from(item, words, p)).collect();
                    if frontier.is_empty() {
                        break;
                    }
                }
                frontier
            }
            Expansion::Alternatives(alts) => {
                alts.iter().flat_map(|a| self.match_from(&a.expansion, words, start)).collect()
            }
            Expansion::Optional(inner) => {
                let mut ends = self.match_from(inner, words, start);
                ends.insert(start);
                ends
            }
            Expansion::RuleRef(name) => match self.rules.get(name) {
                Some(r) => self.match_from(r, words, start),
                None => BTreeSet::new(),
            },
        }
    }
}

impl fmt::Display for Expansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expansion::Terminal(t) => write_terminal(f, t),
            Expansion::RuleRef(r) => write!(f, "<{r}>"),
            Expansion::Optional(inner) => write!(f, "[{inner}]"),
            Expansion::Sequence(items) => {
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_char(' ')?;
                    }
                    match item {
                        Expansion::Sequence(_) | Expansion::Alternatives(_) => write!(f, "({item})")?,
                        _ => write!(f, "{item}")?,
                    }
                }
                Ok(())
            }
            Expansion::Alternatives(alts) => {
                for (i, alt) in alts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    if let Some(w) = alt.weight {
                        write!(f, "/{w}/ ")?;
                    }
                    match &alt.expansion {
                        Expansion::Alternatives(_) => write!(f, "({})", alt.expansion)?,
                        e => write!(f, "{e}")?,
                    }
                }
                Ok(())
            }
        }
    }
}

fn write_terminal(f: &mut fmt::Formatter<'_>, t: &str) -> fmt::Result {
    if t.chars().any(|c| c.is_whitespace() || parser::is_special(c)) {
        write!(f, "\"{t}\"")
    } else {
        f.write_str(t)
    }
}

impl fmt::Display for Grammar {
    /// Canonical source text; parsing it yields an equal grammar.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(name) = &self.name {
            writeln!(f, "grammar {name};")?;
        }
        for (name, e) in &self.rules {
            if self.is_public(name) {
                f.write_str("public ")?;
            }
            writeln!(f, "<{name}> = {e};")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matcher_handles_optionals_and_refs() {
        let g = parse_grammar("public <r> = me (entrega|passa) [tudo] <obj>; <obj> = o celular | \"a carteira\";").unwrap();
        assert!(g.derives("r", "me entrega o celular").unwrap());
        assert!(g.derives("r", "me passa tudo a carteira").unwrap());
        assert!(!g.derives("r", "me passa tudo").unwrap());
        assert!(!g.derives("r", "me entrega o celular agora").unwrap());
        assert!(matches!(g.derives("nope", "x"), Err(JsgfError::UnknownRule(_))));
    }

    #[test]
    fn pretty_print_round_trips() {
        let src = "grammar g; public <r> = /2/ a (b | c d) | /1/ [e [f]] <s>; <s> = \"x y\" | z;";
        let g = parse_grammar(src).unwrap();
        let printed = g.to_string();
        assert_eq!(parse_grammar(&printed).unwrap(), g);
    }
}

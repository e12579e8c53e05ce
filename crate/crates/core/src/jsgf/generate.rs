use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Expansion, Grammar, JsgfError};

type Phrase<'a> = Vec<&'a str>;

/// Lists derivations of `rule` depth-first, left to right, with the absent
/// branch of each optional before the present one. Stops after `limit`.
/// Distinct derivations may spell the same phrase; both are listed.
pub fn enumerate_phrases(g: &Grammar, rule: &str, limit: usize) -> Result<Vec<String>, JsgfError> {
    if limit == 0 {
        return Err(JsgfError::LimitZero);
    }
    let root = g.rule(rule)?;
    Ok(expand(g, root, limit).into_iter().map(|p| p.join(" ")).collect())
}

// The first `limit` items of a product only involve the first `limit`
// items of each factor, so capping every partial list is exact.
fn expand<'a>(g: &'a Grammar, e: &'a Expansion, limit: usize) -> Vec<Phrase<'a>> {
    match e {
        Expansion::Terminal(t) => vec![t.split(' ').collect()],
        Expansion::RuleRef(r) => expand(g, &g.rules[r], limit),
        Expansion::Optional(inner) => {
            let mut out = vec![Vec::new()];
            out.extend(expand(g, inner, limit.saturating_sub(1)));
            out
        }
        Expansion::Alternatives(alts) => {
            let mut out = Vec::new();
            for a in alts {
                if out.len() >= limit {
                    break;
                }
                out.extend(expand(g, &a.expansion, limit - out.len()));
            }
            out
        }
        Expansion::Sequence(items) => {
            let mut acc: Vec<Phrase<'a>> = vec![Vec::new()];
            for item in items {
                let tails = expand(g, item, limit);
                let mut next = Vec::with_capacity(limit.min(acc.len() * tails.len()));
                'outer: for head in &acc {
                    for tail in &tails {
                        if next.len() == limit {
                            break 'outer;
                        }
                        let mut p = head.clone();
                        p.extend_from_slice(tail);
                        next.push(p);
                    }
                }
                acc = next;
            }
            acc
        }
    }
}

/// Number of derivations of `rule`, saturating at `u128::MAX`.
pub fn count_derivations(g: &Grammar, rule: &str) -> Result<u128, JsgfError> {
    fn count(g: &Grammar, e: &Expansion) -> u128 {
        match e {
            Expansion::Terminal(_) => 1,
            Expansion::RuleRef(r) => count(g, &g.rules[r]),
            Expansion::Optional(inner) => count(g, inner).saturating_add(1),
            Expansion::Alternatives(alts) => alts.iter().fold(0u128, |s, a| s.saturating_add(count(g, &a.expansion))),
            Expansion::Sequence(items) => items.iter().fold(1u128, |p, i| p.saturating_mul(count(g, i))),
        }
    }
    Ok(count(g, g.rule(rule)?))
}

fn sample_one<'a>(g: &'a Grammar, e: &'a Expansion, rng: &mut ChaCha8Rng, out: &mut Phrase<'a>) {
    match e {
        Expansion::Terminal(t) => out.extend(t.split(' ')),
        Expansion::RuleRef(r) => sample_one(g, &g.rules[r], rng, out),
        Expansion::Optional(inner) => {
            if rng.random_bool(0.5) {
                sample_one(g, inner, rng, out);
            }
        }
        Expansion::Sequence(items) => items.iter().for_each(|i| sample_one(g, i, rng, out)),
        Expansion::Alternatives(alts) => {
            let total: f64 = alts.iter().map(|a| a.weight.unwrap_or(1.0)).sum();
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = &alts[alts.len() - 1];
            for a in alts {
                let w = a.weight.unwrap_or(1.0);
                if pick < w {
                    chosen = a;
                    break;
                }
                pick -= w;
            }
            sample_one(g, &chosen.expansion, rng, out);
        }
    }
}

/// Draws `count` random derivations. Alternatives are chosen in proportion
/// to their weights (1 when absent) and each optional is taken with
/// probability one half. The same seed gives the same phrases.
pub fn sample_phrases(g: &Grammar, rule: &str, count: usize, seed: u64) -> Result<Vec<String>, JsgfError> {
    if count == 0 {
        return Err(JsgfError::CountZero);
    }
    let root = g.rule(rule)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let mut p = Vec::new();
            sample_one(g, root, &mut rng, &mut p);
            p.join(" ")
        })
        .collect())
}

/// Like [`sample_phrases`] but drops repeats, stopping once `count` distinct
/// phrases are found or after `max_draws` draws.
pub fn sample_unique_phrases(
    g: &Grammar,
    rule: &str,
    count: usize,
    seed: u64,
    max_draws: usize,
) -> Result<Vec<String>, JsgfError> {
    if count == 0 {
        return Err(JsgfError::CountZero);
    }
    let root = g.rule(rule)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..max_draws {
        if out.len() == count {
            break;
        }
        let mut p = Vec::new();
        sample_one(g, root, &mut rng, &mut p);
        let s = p.join(" ");
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    Ok(out)
}

use std::collections::{BTreeMap, BTreeSet};

use super::{Alternative, Expansion, Grammar, JsgfError};

/// Characters that cannot appear in an unquoted terminal.
pub(super) fn is_special(c: char) -> bool {
    matches!(c, ';' | '=' | '|' | '(' | ')' | '[' | ']' | '<' | '>' | '/' | '{' | '}' | '*' | '+' | '"')
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    RuleName(String),
    Weight(f64),
    Sym(char),
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, expected: impl Into<String>) -> JsgfError {
    JsgfError::SyntaxError { line, col, expected: expected.into() }
}

fn lex(src: &str) -> Result<Vec<Spanned>, JsgfError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize| {
        if chars[*i] == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
        *i += 1;
    };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col);
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col);
            }
        } else if c == '#' && out.is_empty() {
            // `#JSGF V1.0 UTF-8;` header
            while i < chars.len() && chars[i] != ';' {
                advance(&mut i, &mut line, &mut col);
            }
            if i == chars.len() {
                return Err(syntax(l0, c0, "';' ending the #JSGF header"));
            }
            advance(&mut i, &mut line, &mut col);
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            return Err(syntax(l0, c0, "'//' line comment (block comments are not supported)"));
        } else if c == '/' {
            advance(&mut i, &mut line, &mut col);
            let start = i;
            while i < chars.len() && chars[i] != '/' && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col);
            }
            let text: String = chars[start..i].iter().collect();
            let weight = text.trim().parse::<f64>().ok().filter(|w| w.is_finite() && *w > 0.0);
            match (weight, chars.get(i)) {
                (Some(w), Some('/')) => {
                    advance(&mut i, &mut line, &mut col);
                    out.push(Spanned { tok: Tok::Weight(w), line: l0, col: c0 });
                }
                _ => return Err(syntax(l0, c0, "positive weight of the form /w/")),
            }
        } else if c == '<' {
            advance(&mut i, &mut line, &mut col);
            let start = i;
            while i < chars.len() && chars[i] != '>' && !chars[i].is_whitespace() && !is_special(chars[i]) {
                advance(&mut i, &mut line, &mut col);
            }
            let name: String = chars[start..i].iter().collect();
            if name.is_empty() || chars.get(i) != Some(&'>') {
                return Err(syntax(l0, c0, "rule name of the form <name>"));
            }
            advance(&mut i, &mut line, &mut col);
            out.push(Spanned { tok: Tok::RuleName(name), line: l0, col: c0 });
        } else if c == '"' {
            advance(&mut i, &mut line, &mut col);
            let start = i;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col);
            }
            if chars.get(i) != Some(&'"') {
                return Err(syntax(l0, c0, "closing '\"'"));
            }
            let text: String = chars[start..i].iter().collect();
            advance(&mut i, &mut line, &mut col);
            let words: Vec<&str> = text.split_whitespace().collect();
            if words.is_empty() {
                return Err(syntax(l0, c0, "non-empty quoted token"));
            }
            out.push(Spanned { tok: Tok::Quoted(words.join(" ")), line: l0, col: c0 });
        } else if c == '{' {
            return Err(syntax(l0, c0, "expansion (tags are not supported)"));
        } else if c == '*' || c == '+' {
            return Err(syntax(l0, c0, "';' or expansion (the * and + operators are not supported)"));
        } else if is_special(c) {
            advance(&mut i, &mut line, &mut col);
            out.push(Spanned { tok: Tok::Sym(c), line: l0, col: c0 });
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && !is_special(chars[i]) {
                advance(&mut i, &mut line, &mut col);
            }
            out.push(Spanned { tok: Tok::Word(chars[start..i].iter().collect()), line: l0, col: c0 });
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: &str) -> JsgfError {
        let t = self.peek();
        syntax(t.line, t.col, expected)
    }

    fn expect_sym(&mut self, c: char) -> Result<(), JsgfError> {
        if self.peek().tok == Tok::Sym(c) {
            self.next();
            Ok(())
        } else {
            Err(self.err(&format!("'{c}'")))
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(x) if x == w)
    }

    fn grammar(&mut self) -> Result<Grammar, JsgfError> {
        let mut g = Grammar::default();
        if self.is_word("grammar") {
            self.next();
            match self.next().tok {
                Tok::Word(name) => g.name = Some(name),
                _ => {
                    self.pos -= 1;
                    return Err(self.err("grammar name"));
                }
            }
            self.expect_sym(';')?;
        }
        while self.peek().tok != Tok::Eof {
            if self.is_word("import") {
                return Err(self.err("rule definition (imports are not supported)"));
            }
            let public = self.is_word("public");
            if public {
                self.next();
            }
            let name = match &self.peek().tok {
                Tok::RuleName(n) => n.clone(),
                _ => return Err(self.err("rule definition '<name> = ...;'")),
            };
            self.next();
            self.expect_sym('=')?;
            let body = self.alternatives()?;
            self.expect_sym(';')?;
            if g.rules.contains_key(&name) {
                return Err(JsgfError::DuplicateRule(name));
            }
            if public {
                g.public_rules.insert(name.clone());
            }
            g.rules.insert(name, body);
        }
        Ok(g)
    }

    fn alternatives(&mut self) -> Result<Expansion, JsgfError> {
        let mut alts = vec![self.weighted()?];
        while self.peek().tok == Tok::Sym('|') {
            self.next();
            alts.push(self.weighted()?);
        }
        if alts.len() == 1 {
            if alts[0].weight.is_some() {
                return Err(self.err("'|' after a weighted alternative"));
            }
            return Ok(alts.pop().unwrap().expansion);
        }
        let weighted = alts.iter().filter(|a| a.weight.is_some()).count();
        if weighted != 0 && weighted != alts.len() {
            return Err(self.err("weights on all alternatives or on none"));
        }
        Ok(Expansion::Alternatives(alts))
    }

    fn weighted(&mut self) -> Result<Alternative, JsgfError> {
        let weight = match self.peek().tok {
            Tok::Weight(w) => {
                self.next();
                Some(w)
            }
            _ => None,
        };
        Ok(Alternative { weight, expansion: self.sequence()? })
    }

    fn sequence(&mut self) -> Result<Expansion, JsgfError> {
        let mut items = Vec::new();
        loop {
            let item = match self.peek().tok.clone() {
                Tok::Word(w) | Tok::Quoted(w) => {
                    self.next();
                    Expansion::Terminal(w)
                }
                Tok::RuleName(r) => {
                    self.next();
                    Expansion::RuleRef(r)
                }
                Tok::Sym('(') => {
                    self.next();
                    let inner = self.alternatives()?;
                    self.expect_sym(')')?;
                    inner
                }
                Tok::Sym('[') => {
                    self.next();
                    let inner = self.alternatives()?;
                    self.expect_sym(']')?;
                    Expansion::Optional(Box::new(inner))
                }
                _ => break,
            };
            items.push(item);
        }
        match items.len() {
            0 => Err(self.err("expansion")),
            1 => Ok(items.pop().unwrap()),
            _ => Ok(Expansion::Sequence(items)),
        }
    }
}

fn collect_refs<'a>(e: &'a Expansion, out: &mut Vec<&'a str>) {
    match e {
        Expansion::Terminal(_) => {}
        Expansion::RuleRef(r) => out.push(r),
        Expansion::Optional(inner) => collect_refs(inner, out),
        Expansion::Sequence(items) => items.iter().for_each(|i| collect_refs(i, out)),
        Expansion::Alternatives(alts) => alts.iter().for_each(|a| collect_refs(&a.expansion, out)),
    }
}

fn check_references(g: &Grammar) -> Result<(), JsgfError> {
    let mut edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (name, body) in &g.rules {
        let mut refs = Vec::new();
        collect_refs(body, &mut refs);
        if let Some(missing) = refs.iter().find(|r| !g.rules.contains_key(**r)) {
            return Err(JsgfError::UnresolvedRule(missing.to_string()));
        }
        edges.insert(name, refs);
    }
    // Three-colour DFS; a grey node reached again closes a cycle.
    let mut done: BTreeSet<&str> = BTreeSet::new();
    for &root in edges.keys() {
        if done.contains(root) {
            continue;
        }
        let mut on_path: BTreeSet<&str> = BTreeSet::from([root]);
        let mut stack: Vec<(&str, usize)> = vec![(root, 0)];
        while let Some((node, idx)) = stack.pop() {
            match edges[node].get(idx) {
                Some(&child) => {
                    stack.push((node, idx + 1));
                    if on_path.contains(child) {
                        return Err(JsgfError::CyclicRule(child.to_string()));
                    }
                    if !done.contains(child) {
                        on_path.insert(child);
                        stack.push((child, 0));
                    }
                }
                None => {
                    on_path.remove(node);
                    done.insert(node);
                }
            }
        }
    }
    Ok(())
}

/// Parses grammar source, then checks that every reference resolves and no
/// rule is recursive.
pub fn parse_grammar(src: &str) -> Result<Grammar, JsgfError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let g = p.grammar()?;
    check_references(&g)?;
    Ok(g)
}

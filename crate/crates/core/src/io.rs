//! Text formats: weighted fact files, tab-separated triples, and learned
//! programs annotated with their precision.
//!
//! Fact grammar (one statement per `.`; `%` starts a line comment):
//!
//! ```text
//! fact := [weight "::"] pred "(" const ("," const)* ")" "."
//! ```
//!
//! Constants are opaque: bare words, bracketed lists such as `[4,3,2,1]`,
//! or single-quoted strings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::extract::ScoredRule;
use crate::logic::{Atom, FactSet, LogicProgram, Predicate, Rule, Term};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: weight {weight} is outside [0,1]")]
    WeightOutOfRange { line: usize, col: usize, weight: f64 },
    #[error("{line}:{col}: predicate {name} used with arity {got} but was declared with arity {expected}")]
    ArityConflict {
        line: usize,
        col: usize,
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("{line}:{col}: predicate {name} has arity {got}; only unary and binary predicates are supported")]
    UnsupportedArity { line: usize, col: usize, name: String, got: usize },
    #[error("line {line}: malformed triple: {msg}")]
    MalformedTriple { line: usize, msg: String },
}

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

fn is_word(c: u8) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, b'_' | b'-' | b'+' | b'*' | b'#' | b'$' | b'@')
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor {
            src: text.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() {
                self.bump();
            } else if c == b'%' {
                while let Some(c) = self.peek() {
                    if c == b'\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        self.skip_trivia();
        match self.peek() {
            Some(x) if x == c => {
                self.bump();
                Ok(())
            }
            Some(x) => Err(self.error(format!("expected '{}', found '{}'", c as char, x as char))),
            None => Err(self.error(format!("expected '{}', found end of input", c as char))),
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_trivia();
        self.peek().is_none()
    }

    fn word(&mut self) -> Result<String, ParseError> {
        self.skip_trivia();
        let start = self.pos;
        while self.peek().is_some_and(is_word) {
            self.bump();
        }
        if start == self.pos {
            return Err(match self.peek() {
                Some(c) => self.error(format!("expected a name, found '{}'", c as char)),
                None => self.error("expected a name, found end of input"),
            });
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    /// Optional `weight ::` prefix.
    fn weight(&mut self) -> Result<Option<f64>, ParseError> {
        self.skip_trivia();
        let save = (self.pos, self.line, self.col);
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, b'.' | b'e' | b'E' | b'-' | b'+'))
        {
            self.bump();
        }
        let num = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        let (line, col) = (save.1, save.2);
        self.skip_trivia();
        if !num.is_empty() && self.src[self.pos..].starts_with(b"::") {
            self.bump();
            self.bump();
            let w: f64 = num.parse().map_err(|_| ParseError::Syntax {
                line,
                col,
                msg: format!("invalid weight '{num}'"),
            })?;
            if !(0.0..=1.0).contains(&w) {
                return Err(ParseError::WeightOutOfRange { line, col, weight: w });
            }
            return Ok(Some(w));
        }
        (self.pos, self.line, self.col) = save;
        Ok(None)
    }

    /// A term label and whether it was written as a quoted/bracketed constant.
    fn term(&mut self) -> Result<(String, bool), ParseError> {
        self.skip_trivia();
        match self.peek() {
            Some(b'[') => {
                let mut depth = 0usize;
                let mut out = String::new();
                loop {
                    match self.bump() {
                        None => return Err(self.error("unterminated list constant")),
                        Some(c) if c.is_ascii_whitespace() => {}
                        Some(c) => {
                            if c == b'[' {
                                depth += 1;
                            } else if c == b']' {
                                depth -= 1;
                            }
                            out.push(c as char);
                            if depth == 0 {
                                break;
                            }
                        }
                    }
                }
                Ok((out, true))
            }
            Some(b'\'') => {
                self.bump();
                let mut out = Vec::new();
                loop {
                    match self.bump() {
                        None => return Err(self.error("unterminated quoted constant")),
                        Some(b'\\') => match self.bump() {
                            Some(c) => out.push(c),
                            None => return Err(self.error("unterminated quoted constant")),
                        },
                        Some(b'\'') => break,
                        Some(c) => out.push(c),
                    }
                }
                Ok((String::from_utf8_lossy(&out).into_owned(), true))
            }
            _ => Ok((self.word()?, false)),
        }
    }

    /// `name(t1, ..., tn)`; `vars` decides whether bare capitalised words are variables.
    fn atom(&mut self, vars: bool) -> Result<(Atom, usize, usize), ParseError> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let name = self.word()?;
        self.expect(b'(')?;
        let mut args = Vec::new();
        loop {
            let (label, quoted) = self.term()?;
            let is_var = vars
                && !quoted
                && label
                    .chars()
                    .next()
                    .is_some_and(|c| c.is_ascii_uppercase() || c == '_');
            args.push(if is_var { Term::Var(label) } else { Term::Const(label) });
            self.skip_trivia();
            match self.peek() {
                Some(b',') => {
                    self.bump();
                }
                Some(b')') => {
                    self.bump();
                    break;
                }
                Some(c) => return Err(self.error(format!("expected ',' or ')', found '{}'", c as char))),
                None => return Err(self.error("unexpected end of input inside atom")),
            }
        }
        if !(1..=2).contains(&args.len()) {
            return Err(ParseError::UnsupportedArity {
                line,
                col,
                name,
                got: args.len(),
            });
        }
        let arity = args.len() as u8;
        Ok((
            Atom {
                predicate: Predicate::new(name, arity),
                args,
            },
            line,
            col,
        ))
    }
}

fn check_arity(
    arities: &mut BTreeMap<String, usize>,
    atom: &Atom,
    line: usize,
    col: usize,
) -> Result<(), ParseError> {
    let got = atom.args.len();
    match arities.get(&atom.predicate.name) {
        Some(&expected) if expected != got => Err(ParseError::ArityConflict {
            line,
            col,
            name: atom.predicate.name.clone(),
            expected,
            got,
        }),
        _ => {
            arities.insert(atom.predicate.name.clone(), got);
            Ok(())
        }
    }
}

pub fn parse_facts(text: &str) -> Result<FactSet, ParseError> {
    let mut cur = Cursor::new(text);
    let mut facts = FactSet::new();
    let mut arities = BTreeMap::new();
    while !cur.at_end() {
        let weight = cur.weight()?.unwrap_or(1.0);
        // arity is checked on the raw argument count so that `p(a,b,c)` after
        // `p/2` reports the conflict rather than the unsupported arity
        let atom = match cur.atom(false) {
            Ok((a, line, col)) => {
                check_arity(&mut arities, &a, line, col)?;
                a
            }
            Err(ParseError::UnsupportedArity { line, col, name, got }) => {
                if let Some(&expected) = arities.get(&name) {
                    return Err(ParseError::ArityConflict {
                        line,
                        col,
                        name,
                        expected,
                        got,
                    });
                }
                return Err(ParseError::UnsupportedArity { line, col, name, got });
            }
            Err(e) => return Err(e),
        };
        cur.expect(b'.')?;
        if let Some(old) = facts.insert(atom.clone(), weight) {
            if old != weight {
                log::warn!("duplicate fact {atom}: weight {old} replaced by {weight}");
            }
        }
    }
    Ok(facts)
}

pub fn parse_triples(text: &str) -> Result<FactSet, ParseError> {
    let mut facts = FactSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(ParseError::MalformedTriple {
                line: i + 1,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(ParseError::MalformedTriple {
                line: i + 1,
                msg: "empty field".into(),
            });
        }
        facts.insert_crisp(Atom::ground(fields[1], &[fields[0], fields[2]]));
    }
    Ok(facts)
}

/// Parses rules written as `head :- b1, ..., bn.` (or bare `head.`).
/// Trailing `%` comments such as precision annotations are ignored.
pub fn parse_program(text: &str) -> Result<LogicProgram, ParseError> {
    let mut cur = Cursor::new(text);
    let mut program = LogicProgram::new();
    let mut arities = BTreeMap::new();
    while !cur.at_end() {
        let (head, line, col) = cur.atom(true)?;
        check_arity(&mut arities, &head, line, col)?;
        let mut body = Vec::new();
        cur.skip_trivia();
        if cur.src[cur.pos..].starts_with(b":-") {
            cur.bump();
            cur.bump();
            loop {
                let (a, line, col) = cur.atom(true)?;
                check_arity(&mut arities, &a, line, col)?;
                body.push(a);
                cur.skip_trivia();
                if cur.peek() == Some(b',') {
                    cur.bump();
                } else {
                    break;
                }
            }
        }
        cur.expect(b'.')?;
        program.push(Rule::new(head, body));
    }
    Ok(program)
}

/// Renders a constant so that [`parse_facts`] and [`parse_program`] read it back
/// as the same constant.
pub fn quote_constant(c: &str) -> String {
    let bytes = c.as_bytes();
    let bare_word = !bytes.is_empty()
        && bytes.iter().all(|&b| is_word(b))
        && !(bytes[0].is_ascii_uppercase() || bytes[0] == b'_');
    let list = bytes.first() == Some(&b'[')
        && !c.contains(char::is_whitespace)
        && !c.contains('\'')
        && balanced(c);
    if bare_word || list {
        c.to_string()
    } else {
        let mut s = String::with_capacity(c.len() + 2);
        s.push('\'');
        for ch in c.chars() {
            if ch == '\'' || ch == '\\' {
                s.push('\\');
            }
            s.push(ch);
        }
        s.push('\'');
        s
    }
}

fn balanced(c: &str) -> bool {
    let mut depth = 0i64;
    for (i, ch) in c.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 && i + 1 != c.len() {
                    return false;
                }
            }
            _ => {}
        }
        if depth < 0 {
            return false;
        }
    }
    depth == 0
}

pub fn serialize_facts(facts: &FactSet) -> String {
    let mut out = String::new();
    for (atom, w) in facts.iter() {
        if w != 1.0 {
            let _ = write!(out, "{w}::");
        }
        let _ = writeln!(out, "{atom}.");
    }
    out
}

pub fn serialize_program(rules: &[ScoredRule]) -> String {
    let mut out = String::new();
    for r in rules {
        let _ = writeln!(
            out,
            "{} % precision={:.2} ({}/{})",
            r.rule, r.precision, r.n_r, r.n_b
        );
    }
    out
}

//! First-order logic objects and their symbolic semantics.
//!
//! Programs are function-free Datalog over unary and binary predicates.
//! Interpretations are finite sets of ground atoms; weighted fact sets are
//! read crisply (weight >= 0.5 is true) by every operation in this module.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ground::{CompiledRule, Database};

/// Weight at or above which a weighted fact counts as true symbolically.
pub const CRISP_THRESHOLD: f64 = 0.5;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LogicError {
    #[error("variable {0} is not bound by the substitution")]
    UnboundVariable(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("predicate {name} expects {arity} arguments, got {got}")]
    ArityMismatch { name: String, arity: u8, got: usize },
    #[error("unsupported arity {0}; predicates must be unary or binary")]
    UnsupportedArity(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub name: String,
    pub arity: u8,
}

impl Predicate {
    pub fn new(name: impl Into<String>, arity: u8) -> Self {
        let name = name.into();
        debug_assert!(!name.is_empty());
        debug_assert!(arity == 1 || arity == 2);
        Predicate { name, arity }
    }

    /// Parses `name/arity`.
    pub fn parse(s: &str) -> Option<Self> {
        let (name, arity) = s.trim().rsplit_once('/')?;
        let arity: u8 = arity.parse().ok()?;
        if name.is_empty() || !(arity == 1 || arity == 2) {
            return None;
        }
        Some(Predicate::new(name, arity))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(s: impl Into<String>) -> Self {
        Term::Var(s.into())
    }

    pub fn constant(s: impl Into<String>) -> Self {
        Term::Const(s.into())
    }

    pub fn label(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => f.write_str(&crate::io::quote_constant(c)),
        }
    }
}

/// Atoms order lexicographically on (predicate name, arity, arguments).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: Predicate,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: Predicate, args: Vec<Term>) -> Result<Self, LogicError> {
        if args.len() != predicate.arity as usize {
            return Err(LogicError::ArityMismatch {
                name: predicate.name.clone(),
                arity: predicate.arity,
                got: args.len(),
            });
        }
        Ok(Atom { predicate, args })
    }

    /// Ground atom from constant labels; arity is taken from the argument count.
    pub fn ground(name: &str, args: &[&str]) -> Self {
        Atom {
            predicate: Predicate::new(name, args.len() as u8),
            args: args.iter().map(|a| Term::constant(*a)).collect(),
        }
    }

    /// Unground atom from variable labels.
    pub fn unground(name: &str, vars: &[&str]) -> Self {
        Atom {
            predicate: Predicate::new(name, vars.len() as u8),
            args: vars.iter().map(|a| Term::var(*a)).collect(),
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }

    pub fn constants(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Const(c) => Some(c.as_str()),
            Term::Var(_) => None,
        })
    }

    pub fn mentions_var(&self, var: &str) -> bool {
        self.variables().any(|v| v == var)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate.name)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

/// A definite clause. The body is kept sorted and duplicate-free so that
/// structural equality coincides with rule identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    head: Atom,
    body: Vec<Atom>,
}

impl Rule {
    pub fn new(head: Atom, body: impl IntoIterator<Item = Atom>) -> Self {
        let body: BTreeSet<Atom> = body.into_iter().collect();
        Rule {
            head,
            body: body.into_iter().collect(),
        }
    }

    pub fn head(&self) -> &Atom {
        &self.head
    }

    pub fn body(&self) -> &[Atom] {
        &self.body
    }

    /// Variables in first-occurrence order: head first, then body.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for atom in std::iter::once(&self.head).chain(self.body.iter()) {
            for v in atom.variables() {
                if !out.iter().any(|o| o == v) {
                    out.push(v.to_string());
                }
            }
        }
        out
    }

    pub fn is_tautology(&self) -> bool {
        self.body.contains(&self.head)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, a) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
        }
        f.write_str(".")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogicProgram {
    rules: Vec<Rule>,
}

impl LogicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a rule unless an identical one is already present.
    pub fn push(&mut self, rule: Rule) -> bool {
        if self.rules.contains(&rule) {
            false
        } else {
            self.rules.push(rule);
            true
        }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn contains(&self, rule: &Rule) -> bool {
        self.rules.contains(rule)
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = Rule>) {
        for r in other {
            self.push(r);
        }
    }
}

impl FromIterator<Rule> for LogicProgram {
    fn from_iter<I: IntoIterator<Item = Rule>>(iter: I) -> Self {
        let mut p = LogicProgram::new();
        p.extend(iter);
        p
    }
}

impl fmt::Display for LogicProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

/// Ground atoms with truth weights in [0,1]. Absent atoms are false.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FactSet {
    entries: BTreeMap<Atom, f64>,
}

impl FactSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or overwrites. Returns the previous weight when the atom was present.
    pub fn insert(&mut self, atom: Atom, weight: f64) -> Option<f64> {
        debug_assert!(atom.is_ground(), "fact {atom} is not ground");
        debug_assert!((0.0..=1.0).contains(&weight));
        self.entries.insert(atom, weight)
    }

    pub fn insert_crisp(&mut self, atom: Atom) {
        self.insert(atom, 1.0);
    }

    pub fn extend_crisp(&mut self, atoms: impl IntoIterator<Item = Atom>) {
        for a in atoms {
            self.insert_crisp(a);
        }
    }

    pub fn remove(&mut self, atom: &Atom) -> Option<f64> {
        self.entries.remove(atom)
    }

    pub fn weight(&self, atom: &Atom) -> f64 {
        self.entries.get(atom).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.entries.contains_key(atom)
    }

    /// Crisp truth: present with weight at least [`CRISP_THRESHOLD`].
    pub fn holds(&self, atom: &Atom) -> bool {
        self.weight(atom) >= CRISP_THRESHOLD
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Atom, f64)> {
        self.entries.iter().map(|(a, w)| (a, *w))
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.entries.keys()
    }

    pub fn weights_mut(&mut self) -> impl Iterator<Item = (&Atom, &mut f64)> {
        self.entries.iter_mut()
    }

    /// Atoms that hold crisply.
    pub fn true_atoms(&self) -> BTreeSet<Atom> {
        self.entries
            .iter()
            .filter(|(_, w)| **w >= CRISP_THRESHOLD)
            .map(|(a, _)| a.clone())
            .collect()
    }

    /// Union; on overlap the weight from `other` wins.
    pub fn union(&self, other: &FactSet) -> FactSet {
        let mut out = self.clone();
        for (a, w) in other.iter() {
            out.insert(a.clone(), w);
        }
        out
    }

    pub fn constants(&self) -> BTreeSet<String> {
        self.entries
            .keys()
            .flat_map(|a| a.constants().map(str::to_string))
            .collect()
    }

    pub fn predicates(&self) -> BTreeSet<Predicate> {
        self.entries.keys().map(|a| a.predicate.clone()).collect()
    }

    pub fn with_predicate<'a>(&'a self, p: &'a Predicate) -> impl Iterator<Item = (&'a Atom, f64)> + 'a {
        self.iter().filter(move |(a, _)| &a.predicate == p)
    }
}

impl FromIterator<Atom> for FactSet {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        let mut f = FactSet::new();
        for a in iter {
            f.insert_crisp(a);
        }
        f
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution {
    bindings: BTreeMap<String, String>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, var: impl Into<String>, constant: impl Into<String>) {
        self.bindings.insert(var.into(), constant.into());
    }

    pub fn with(mut self, var: &str, constant: &str) -> Self {
        self.bind(var, constant);
        self
    }

    pub fn get(&self, var: &str) -> Option<&str> {
        self.bindings.get(var).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, c)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}/{v}")?;
        }
        f.write_str("}")
    }
}

pub fn apply_substitution(atom: &Atom, sub: &Substitution) -> Result<Atom, LogicError> {
    let args = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Const(_) => Ok(t.clone()),
            Term::Var(v) => sub
                .get(v)
                .map(Term::constant)
                .ok_or_else(|| LogicError::UnboundVariable(v.clone())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Atom {
        predicate: atom.predicate.clone(),
        args,
    })
}

fn program_constants(program: &LogicProgram) -> BTreeSet<String> {
    program
        .rules()
        .iter()
        .flat_map(|r| std::iter::once(r.head()).chain(r.body().iter()))
        .flat_map(|a| a.constants().map(str::to_string))
        .collect()
}

/// One application of the immediate consequence operator.
pub fn tp_symbolic(program: &LogicProgram, interp: &BTreeSet<Atom>) -> BTreeSet<Atom> {
    let mut universe: BTreeSet<String> = interp
        .iter()
        .flat_map(|a| a.constants().map(str::to_string))
        .collect();
    universe.extend(program_constants(program));
    let db = Database::from_atoms(interp.iter(), universe.iter().map(String::as_str));
    let mut out = BTreeSet::new();
    for rule in program.rules() {
        let compiled = CompiledRule::compile(rule, &db);
        compiled.for_each_head(&db, |head| {
            out.insert(db.decode(&compiled.head_pred, head));
        });
    }
    out
}

/// Vectorized consequence operator over a single head feature: returns `[1]`
/// iff some row of `matrix` has dot product at least 1 with `v_i`.
pub fn tp_vectorized(matrix: &[Vec<f64>], v_i: &[f64]) -> Result<Vec<f64>, LogicError> {
    let mut fired = false;
    for row in matrix {
        if row.len() != v_i.len() {
            return Err(LogicError::DimensionMismatch {
                expected: row.len(),
                got: v_i.len(),
            });
        }
        let dot: f64 = row.iter().zip(v_i).map(|(a, b)| a * b).sum();
        // tolerance for rows such as [1/3, 1/3, 1/3]
        if dot >= 1.0 - 1e-9 {
            fired = true;
        }
    }
    Ok(vec![if fired { 1.0 } else { 0.0 }])
}

/// Least fixpoint of `I -> I ∪ T_P(I)` from the crisp facts.
pub fn forward_chain_closure(program: &LogicProgram, facts: &FactSet) -> BTreeSet<Atom> {
    let mut db = Database::from_factset(facts);
    for c in program_constants(program) {
        db.intern(&c);
    }
    closure_in_place(program, &mut db);
    db.all_atoms()
}

pub(crate) fn closure_in_place(program: &LogicProgram, db: &mut Database) {
    let compiled: Vec<CompiledRule> = program
        .rules()
        .iter()
        .map(|r| CompiledRule::compile(r, db))
        .collect();
    loop {
        let mut fresh = Vec::new();
        for rule in &compiled {
            rule.for_each_head(db, |head| {
                if !db.contains(&rule.head_pred, head) {
                    fresh.push((rule.head_pred.clone(), head.to_vec()));
                }
            });
        }
        let mut added = false;
        for (p, args) in fresh {
            added |= db.insert_ids(&p, &args);
        }
        if !added {
            break;
        }
    }
}

/// Precision of a rule against crisp facts: `(n_r / n_b, n_r, n_b)` where
/// `n_b` counts total substitutions of the rule's variables (over the facts'
/// constants) satisfying the body, and `n_r` those also satisfying the head.
pub fn rule_precision(rule: &Rule, facts: &FactSet) -> (f64, u64, u64) {
    let db = Database::from_factset(facts);
    rule_precision_in(rule, &db)
}

pub(crate) fn rule_precision_in(rule: &Rule, db: &Database) -> (f64, u64, u64) {
    let compiled = CompiledRule::compile(rule, db);
    let (n_r, n_b) = compiled.count_support(db);
    let precision = if n_b == 0 { 0.0 } else { n_r as f64 / n_b as f64 };
    (precision, n_r, n_b)
}

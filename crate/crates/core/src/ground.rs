//! Interned, indexed storage of ground atoms and a nested-loop join for
//! rule bodies. Backs closure, T_P and precision counting.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::logic::{Atom, FactSet, Predicate, Rule, Term, CRISP_THRESHOLD};

const NONE: u32 = u32::MAX;

#[derive(Debug, Default, Clone)]
struct Relation {
    tuples: HashSet<[u32; 2]>,
    order: Vec<[u32; 2]>,
    by_first: HashMap<u32, Vec<u32>>,
    by_second: HashMap<u32, Vec<u32>>,
}

impl Relation {
    fn insert(&mut self, t: [u32; 2]) -> bool {
        if !self.tuples.insert(t) {
            return false;
        }
        self.order.push(t);
        self.by_first.entry(t[0]).or_default().push(t[1]);
        if t[1] != NONE {
            self.by_second.entry(t[1]).or_default().push(t[0]);
        }
        true
    }
}

#[derive(Debug, Default, Clone)]
pub(crate) struct Database {
    names: Vec<String>,
    ids: HashMap<String, u32>,
    rels: HashMap<Predicate, Relation>,
}

fn key(args: &[u32]) -> [u32; 2] {
    match args {
        [a] => [*a, NONE],
        [a, b] => [*a, *b],
        _ => unreachable!("only unary and binary predicates are stored"),
    }
}

impl Database {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn universe_size(&self) -> usize {
        self.names.len()
    }

    /// Crisp facts only; the universe still covers every constant mentioned.
    pub fn from_factset(facts: &FactSet) -> Self {
        let mut db = Database::default();
        for (atom, w) in facts.iter() {
            let ids: Vec<u32> = atom.args.iter().map(|t| db.intern(t.label())).collect();
            if w >= CRISP_THRESHOLD {
                db.insert_ids(&atom.predicate, &ids);
            }
        }
        db
    }

    pub fn from_atoms<'a>(atoms: impl Iterator<Item = &'a Atom>, universe: impl Iterator<Item = &'a str>) -> Self {
        let mut db = Database::default();
        for c in universe {
            db.intern(c);
        }
        for atom in atoms {
            db.insert_atom(atom);
        }
        db
    }

    pub fn insert_atom(&mut self, atom: &Atom) -> bool {
        let ids: Vec<u32> = atom.args.iter().map(|t| self.intern(t.label())).collect();
        self.insert_ids(&atom.predicate, &ids)
    }

    pub fn insert_ids(&mut self, pred: &Predicate, args: &[u32]) -> bool {
        match self.rels.get_mut(pred) {
            Some(r) => r.insert(key(args)),
            None => {
                let mut r = Relation::default();
                r.insert(key(args));
                self.rels.insert(pred.clone(), r);
                true
            }
        }
    }

    pub fn contains(&self, pred: &Predicate, args: &[u32]) -> bool {
        if args.contains(&NONE) {
            return false;
        }
        self.rels
            .get(pred)
            .is_some_and(|r| r.tuples.contains(&key(args)))
    }

    pub fn contains_atom(&self, atom: &Atom) -> bool {
        let ids: Option<Vec<u32>> = atom.args.iter().map(|t| self.id(t.label())).collect();
        ids.is_some_and(|ids| self.contains(&atom.predicate, &ids))
    }

    pub fn decode(&self, pred: &Predicate, args: &[u32]) -> Atom {
        Atom {
            predicate: pred.clone(),
            args: args.iter().map(|&i| Term::constant(self.name(i))).collect(),
        }
    }

    pub fn all_atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        for (p, r) in &self.rels {
            for t in &r.order {
                out.insert(self.decode(p, &t[..p.arity as usize]));
            }
        }
        out
    }

    fn relation(&self, pred: &Predicate) -> Option<&Relation> {
        self.rels.get(pred)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Var(usize),
    Const(u32),
}

#[derive(Debug, Clone)]
struct CompiledAtom {
    pred: Predicate,
    slots: Vec<Slot>,
}

/// A rule with variables numbered and body atoms ordered for joining.
#[derive(Debug, Clone)]
pub(crate) struct CompiledRule {
    pub head_pred: Predicate,
    head: CompiledAtom,
    body: Vec<CompiledAtom>,
    n_vars: usize,
    /// Variables that occur in the head but not in the body.
    free_head_vars: Vec<usize>,
}

impl CompiledRule {
    pub fn compile(rule: &Rule, db: &Database) -> Self {
        let vars = rule.variables();
        let index = |v: &str| vars.iter().position(|x| x == v).expect("variable collected");
        let compile_atom = |a: &Atom| CompiledAtom {
            pred: a.predicate.clone(),
            slots: a
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Slot::Var(index(v)),
                    Term::Const(c) => Slot::Const(db.id(c).unwrap_or(NONE)),
                })
                .collect(),
        };
        let head = compile_atom(rule.head());
        let mut pending: Vec<CompiledAtom> = rule.body().iter().map(compile_atom).collect();

        // greedy order: most already-bound slots first, then smaller relations
        let mut bound = vec![false; vars.len()];
        let mut body = Vec::with_capacity(pending.len());
        while !pending.is_empty() {
            let score = |a: &CompiledAtom| {
                let free = a
                    .slots
                    .iter()
                    .filter(|s| matches!(s, Slot::Var(v) if !bound[*v]))
                    .count();
                let size = db.relation(&a.pred).map_or(0, |r| r.order.len());
                (free, size)
            };
            let best = (0..pending.len()).min_by_key(|&i| score(&pending[i])).unwrap();
            let atom = pending.remove(best);
            for s in &atom.slots {
                if let Slot::Var(v) = s {
                    bound[*v] = true;
                }
            }
            body.push(atom);
        }
        let free_head_vars = (0..vars.len()).filter(|v| !bound[*v]).collect();
        CompiledRule {
            head_pred: rule.head().predicate.clone(),
            head,
            body,
            n_vars: vars.len(),
            free_head_vars,
        }
    }

    /// Calls `f` once per total binding of the body variables that satisfies
    /// the body. Head-only variables are left as `NONE`.
    fn for_each_body_binding(&self, db: &Database, mut f: impl FnMut(&[u32])) {
        let mut binding = vec![NONE; self.n_vars];
        self.join(db, 0, &mut binding, &mut f);
    }

    fn join(&self, db: &Database, depth: usize, binding: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
        let Some(atom) = self.body.get(depth) else {
            f(binding);
            return;
        };
        let Some(rel) = db.relation(&atom.pred) else {
            return;
        };
        let value = |s: &Slot, b: &[u32]| match s {
            Slot::Const(c) => *c,
            Slot::Var(v) => b[*v],
        };
        let s0 = atom.slots[0];
        let v0 = value(&s0, binding);
        if atom.slots.len() == 1 {
            if v0 != NONE {
                if rel.tuples.contains(&[v0, NONE]) {
                    self.join(db, depth + 1, binding, f);
                }
            } else if let Slot::Var(x) = s0 {
                for t in &rel.order {
                    binding[x] = t[0];
                    self.join(db, depth + 1, binding, f);
                }
                binding[x] = NONE;
            }
            return;
        }
        let s1 = atom.slots[1];
        let v1 = value(&s1, binding);
        match (v0 != NONE, v1 != NONE) {
            (true, true) => {
                if rel.tuples.contains(&[v0, v1]) {
                    self.join(db, depth + 1, binding, f);
                }
            }
            (true, false) => {
                let Slot::Var(y) = s1 else { return };
                if let Some(objs) = rel.by_first.get(&v0) {
                    for &o in objs {
                        binding[y] = o;
                        self.join(db, depth + 1, binding, f);
                    }
                    binding[y] = NONE;
                }
            }
            (false, true) => {
                let Slot::Var(x) = s0 else { return };
                if let Some(subs) = rel.by_second.get(&v1) {
                    for &s in subs {
                        binding[x] = s;
                        self.join(db, depth + 1, binding, f);
                    }
                    binding[x] = NONE;
                }
            }
            (false, false) => {
                let (Slot::Var(x), Slot::Var(y)) = (s0, s1) else { return };
                for t in &rel.order {
                    if x == y && t[0] != t[1] {
                        continue;
                    }
                    binding[x] = t[0];
                    binding[y] = t[1];
                    self.join(db, depth + 1, binding, f);
                }
                binding[x] = NONE;
                binding[y] = NONE;
            }
        }
    }

    fn head_args(&self, binding: &[u32], out: &mut Vec<u32>) {
        out.clear();
        out.extend(self.head.slots.iter().map(|s| match s {
            Slot::Const(c) => *c,
            Slot::Var(v) => binding[*v],
        }));
    }

    /// Calls `f` with the head of every ground instance whose body holds.
    pub fn for_each_head(&self, db: &Database, mut f: impl FnMut(&[u32])) {
        let universe = db.universe_size() as u32;
        let mut head = Vec::with_capacity(2);
        let free = &self.free_head_vars;
        self.for_each_body_binding(db, |b| {
            let mut b = b.to_vec();
            for_each_assignment(free, universe, &mut b, &mut |full| {
                self.head_args(full, &mut head);
                if !head.contains(&NONE) {
                    f(&head);
                }
            });
        });
    }

    /// `(n_r, n_b)` over total substitutions of all rule variables.
    pub fn count_support(&self, db: &Database) -> (u64, u64) {
        let universe = db.universe_size() as u32;
        let free = &self.free_head_vars;
        let per_binding = (universe as u64).pow(free.len() as u32);
        let mut n_b = 0u64;
        let mut n_r = 0u64;
        let mut head = Vec::with_capacity(2);
        self.for_each_body_binding(db, |b| {
            n_b += per_binding;
            if free.is_empty() {
                self.head_args(b, &mut head);
                if db.contains(&self.head_pred, &head) {
                    n_r += 1;
                }
            } else {
                let mut b = b.to_vec();
                for_each_assignment(free, universe, &mut b, &mut |full| {
                    self.head_args(full, &mut head);
                    if db.contains(&self.head_pred, &head) {
                        n_r += 1;
                    }
                });
            }
        });
        (n_r, n_b)
    }
}

fn for_each_assignment(free: &[usize], universe: u32, binding: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
    match free.split_first() {
        None => f(binding),
        Some((&v, rest)) => {
            for c in 0..universe {
                binding[v] = c;
                for_each_assignment(rest, universe, binding, f);
            }
            binding[v] = NONE;
        }
    }
}

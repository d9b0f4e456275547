//! Generators for the bundled benchmark tasks.
//!
//! Arithmetic tasks are tested on a larger number range with its own `succ`
//! facts. The other tasks come with a single small world; their test set is
//! a renamed copy of that world (every constant gets a `t_` prefix), so the
//! learned program must derive the positives from the background alone and
//! must not derive any closed-world negative.

use std::collections::BTreeSet;

use crate::engine::HyperParams;
use crate::logic::{Atom, FactSet, Predicate, Term};
use crate::pipeline::LearnConfig;
use crate::task::TaskSpec;

pub const CATALOG: [&str; 21] = [
    "predecessor",
    "odd",
    "even10",
    "even20",
    "succ2",
    "lessthan",
    "fizz",
    "buzz",
    "member",
    "length",
    "son",
    "grandparent",
    "relatedness",
    "father",
    "directed-edge",
    "adjacent-to-red",
    "two-children",
    "graph-coloring-6",
    "graph-coloring-10",
    "connectedness",
    "cyclic",
];

/// Tasks whose data is not given verbatim and had to be reconstructed.
pub const RECONSTRUCTED: [&str; 2] = ["grandparent", "father"];

/// Settings used for the bundled tasks: a smaller learning rate, short
/// rounds with many fresh restarts, and generalized sound rules.
/// Equivalent to `--lr 0.02 --epochs 300 --restarts 300 --generalize`.
pub fn recommended_config(seed: u64) -> LearnConfig {
    let hp = HyperParams {
        lr: 0.02,
        epochs: 300,
        restarts: 300,
        seed,
        ..HyperParams::default()
    };
    let mut config = LearnConfig::new(hp, 1.0);
    config.train.generalize = true;
    config
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("unknown task `{0}`; available: {}", CATALOG.join(", "))]
pub struct UnknownTask(pub String);

fn a1(p: &str, x: impl ToString) -> Atom {
    Atom::ground(p, &[&x.to_string()])
}

fn a2(p: &str, x: impl ToString, y: impl ToString) -> Atom {
    Atom::ground(p, &[&x.to_string(), &y.to_string()])
}

fn facts(atoms: impl IntoIterator<Item = Atom>) -> FactSet {
    atoms.into_iter().collect()
}

/// Parses `"p(a,b) q(c)"`-style shorthand used for the small worlds below.
fn world(text: &str) -> FactSet {
    crate::io::parse_facts(text).expect("catalog facts are well formed")
}

fn succ_range(lo: u32, hi: u32) -> impl Iterator<Item = Atom> {
    (lo..hi).map(|x| a2("succ", x, x + 1))
}

/// Training spec over numbers plus a test range `test_lo..=test_hi` with the
/// background extended by `extend(lo, hi)`.
fn numeric(
    name: &str,
    target: Predicate,
    depth: usize,
    background: FactSet,
    positives: FactSet,
    test: (u32, u32),
    extend: impl Fn(u32, u32) -> Vec<Atom>,
    concept: impl Fn(&[u32]) -> bool,
) -> TaskSpec {
    let mut spec = TaskSpec::new(name, target.clone(), depth, background, positives);
    let (lo, hi) = test;
    let train_bg = spec.background.clone();
    spec.test_background = extend(lo.saturating_sub(1), hi)
        .into_iter()
        .filter(|a| !train_bg.contains(a))
        .collect();
    for x in lo..=hi {
        if target.arity == 1 {
            let atom = a1(&target.name, x);
            if concept(&[x]) {
                spec.test_positives.insert_crisp(atom);
            } else {
                spec.test_negatives.insert_crisp(atom);
            }
        } else {
            for y in lo..=hi {
                let atom = a2(&target.name, x, y);
                if concept(&[x, y]) {
                    spec.test_positives.insert_crisp(atom);
                } else {
                    spec.test_negatives.insert_crisp(atom);
                }
            }
        }
    }
    spec
}

fn rename(atom: &Atom) -> Atom {
    Atom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|t| Term::constant(format!("t_{}", t.label())))
            .collect(),
    }
}

/// Uses a renamed copy of the training world as the test set.
fn with_renamed_test(mut spec: TaskSpec) -> TaskSpec {
    spec.test_background = spec.background.atoms().map(rename).collect();
    spec.test_positives = spec.positives.atoms().map(rename).collect();
    let entities = spec.entities();
    let mut negatives = FactSet::new();
    let mut push = |atom: Atom| {
        if !spec.positives.contains(&atom) {
            negatives.insert_crisp(rename(&atom));
        }
    };
    if spec.target.arity == 1 {
        for e in &entities {
            push(a1(&spec.target.name, e));
        }
    } else {
        for x in &entities {
            for y in &entities {
                push(a2(&spec.target.name, x, y));
            }
        }
    }
    spec.test_negatives = negatives;
    spec
}

/// Uses a separately built world as the test set.
fn with_test_world(mut spec: TaskSpec, background: FactSet, concept: impl Fn(&BTreeSet<Atom>, &[&str]) -> bool) -> TaskSpec {
    let atoms = background.true_atoms();
    let entities: Vec<String> = background.constants().into_iter().collect();
    let target = spec.target.clone();
    let mut classify = |args: &[&str]| {
        let atom = Atom::ground(&target.name, args);
        if concept(&atoms, args) {
            spec.test_positives.insert_crisp(atom);
        } else {
            spec.test_negatives.insert_crisp(atom);
        }
    };
    for x in &entities {
        if target.arity == 1 {
            classify(&[x]);
        } else {
            for y in &entities {
                classify(&[x, y]);
            }
        }
    }
    spec.test_background = background;
    spec
}

fn arithmetic_background(n: u32) -> FactSet {
    let mut b: FactSet = succ_range(0, n).collect();
    b.insert_crisp(a1("zero", 0));
    b
}

fn succ_extension(lo: u32, hi: u32) -> Vec<Atom> {
    succ_range(lo, hi).collect()
}

pub fn generate(name: &str) -> Result<TaskSpec, UnknownTask> {
    let p = Predicate::new;
    let spec = match name {
        "predecessor" => numeric(
            name,
            p("pre", 2),
            0,
            arithmetic_background(9),
            facts((0..=8).map(|x| a2("pre", x + 1, x))),
            (10, 19),
            succ_extension,
            |v| v[0] == v[1] + 1,
        ),
        "odd" => numeric(
            name,
            p("odd", 1),
            1,
            arithmetic_background(9),
            facts((0..=9).filter(|x| x % 2 == 1).map(|x| a1("odd", x))),
            (10, 19),
            succ_extension,
            |v| v[0] % 2 == 1,
        ),
        "even10" => numeric(
            name,
            p("even", 1),
            1,
            arithmetic_background(9),
            facts((0..=9).filter(|x| x % 2 == 0).map(|x| a1("even", x))),
            (10, 19),
            succ_extension,
            |v| v[0] % 2 == 0,
        ),
        "even20" => numeric(
            name,
            p("even", 1),
            1,
            arithmetic_background(19),
            facts((0..=19).filter(|x| x % 2 == 0).map(|x| a1("even", x))),
            (20, 29),
            succ_extension,
            |v| v[0] % 2 == 0,
        ),
        "succ2" => numeric(
            name,
            p("succ2", 2),
            1,
            arithmetic_background(9),
            facts((0..=7).map(|x| a2("succ2", x, x + 2))),
            (10, 19),
            succ_extension,
            |v| v[1] == v[0] + 2,
        ),
        "lessthan" => numeric(
            name,
            p("lt", 2),
            1,
            arithmetic_background(9),
            facts((0..=9).flat_map(|x| (0..=9).filter(move |y| x < *y).map(move |y| a2("lt", x, y)))),
            (10, 19),
            succ_extension,
            |v| v[0] < v[1],
        ),
        "fizz" => numeric(
            name,
            p("fizz", 1),
            2,
            arithmetic_background(6),
            facts((0..=6).filter(|x| x % 3 == 0).map(|x| a1("fizz", x))),
            (7, 20),
            succ_extension,
            |v| v[0] % 3 == 0,
        ),
        "buzz" => {
            let mut b = arithmetic_background(9);
            b.extend_crisp((0..=6).map(|x| a2("pred3", x, x + 3)));
            b.extend_crisp((0..=7).map(|x| a2("pred2", x, x + 2)));
            numeric(
                name,
                p("buzz", 1),
                1,
                b,
                facts((0..=9).filter(|x| x % 5 == 0).map(|x| a1("buzz", x))),
                (10, 24),
                |lo, hi| {
                    let mut v: Vec<Atom> = succ_range(lo, hi).collect();
                    v.extend((lo.saturating_sub(3)..=hi.saturating_sub(3)).map(|x| a2("pred3", x, x + 3)));
                    v.extend((lo.saturating_sub(2)..=hi.saturating_sub(2)).map(|x| a2("pred2", x, x + 2)));
                    v
                },
                |v| v[0] % 5 == 0,
            )
        }
        "member" => with_renamed_test(TaskSpec::new(
            name,
            p("member", 2),
            1,
            world(
                "cons([4,3,2,1],[3,2,1]). cons([3,2,1],[2,1]). cons([2,1],[1]).
                 value([4,3,2,1],4). value([1],1). value([3,2,1],3). value([2,1],2).",
            ),
            world(
                "member(4,[4,3,2,1]). member(3,[4,3,2,1]). member(3,[3,2,1]).
                 member(2,[4,3,2,1]). member(2,[3,2,1]). member(2,[2,1]).
                 member(1,[4,3,2,1]). member(1,[3,2,1]). member(1,[2,1]). member(1,[1]).",
            ),
        )),
        "length" => with_renamed_test(TaskSpec::new(
            name,
            p("length", 2),
            2,
            world(
                "succ(0,1). succ(1,2). succ(2,3).
                 cons([2,1],[1]). cons([4,3,2,1],[3,2,1]). cons([3,2,1],[2,1]).",
            ),
            world("length([4,3,2,1],4). length([3,2,1],3). length([2,1],2)."),
        )),
        "son" => with_renamed_test(TaskSpec::new(
            name,
            p("son", 2),
            1,
            world(
                "father(a,b). father(a,c). father(d,e). father(d,f). father(g,h). father(g,i).
                 brother(b,c). brother(c,b). brother(e,f).
                 sister(f,e). sister(h,i). sister(i,h).",
            ),
            world("son(b,a). son(c,a). son(e,d)."),
        )),
        "grandparent" => grandparent(),
        "relatedness" => with_renamed_test(TaskSpec::new(
            name,
            p("relatedness", 2),
            1,
            world("parent(a,b). parent(a,c). parent(c,e). parent(c,f). parent(d,c). parent(g,h)."),
            world(
                "relatedness(a,b). relatedness(a,c). relatedness(a,e). relatedness(a,f).
                 relatedness(f,a). relatedness(a,a). relatedness(d,b). relatedness(h,g).",
            ),
        )),
        "father" => with_renamed_test(TaskSpec::new(
            name,
            p("father", 2),
            1,
            world(
                "husband(louis_vii,eleanor_of_aquitaine). husband(louis_vii,adele_of_champagne).
                 husband(henry_ii,eleanor_of_aquitaine). husband(henry_viii,anne_boleyn).
                 mother(adele_of_champagne,philip_ii). mother(anne_boleyn,elizabeth_i).
                 brother(richard_i,john). brother(john,richard_i).
                 sister(mary_i,elizabeth_i). sister(elizabeth_i,mary_i).",
            ),
            world("father(louis_vii,philip_ii). father(henry_viii,elizabeth_i)."),
        )),
        "directed-edge" => with_renamed_test(TaskSpec::new(
            name,
            p("d_edge", 2),
            0,
            world("edge(a,b). edge(b,d). edge(c,c)."),
            world("d_edge(a,b). d_edge(b,a). d_edge(b,d). d_edge(d,b). d_edge(c,c)."),
        )),
        "adjacent-to-red" => with_renamed_test(TaskSpec::new(
            name,
            p("ared", 1),
            1,
            world(
                "edge(a,b). edge(b,a). edge(c,d). edge(c,e). edge(d,e).
                 color(a,red). color(b,green). color(c,red). color(d,red). color(e,green).",
            ),
            world("ared(b). ared(c). ared(e)."),
        )),
        "two-children" => {
            let mut b = world("edge(a,b). edge(a,c). edge(b,d). edge(c,d). edge(c,e). edge(d,e).");
            let nodes = ["a", "b", "c", "d", "e"];
            for x in nodes {
                for y in nodes {
                    if x != y {
                        b.insert_crisp(a2("neq", x, y));
                    }
                }
            }
            with_renamed_test(TaskSpec::new(name, p("tc", 1), 1, b, world("tc(a). tc(c).")))
        }
        "graph-coloring-6" => with_renamed_test(TaskSpec::new(
            name,
            p("gc", 1),
            1,
            world(
                "edge(a,b). edge(b,c). edge(b,d). edge(c,e). edge(e,f).
                 color(a,green). color(b,red). color(c,green). color(d,green). color(e,red). color(f,red).",
            ),
            world("gc(e)."),
        )),
        "graph-coloring-10" => with_renamed_test(TaskSpec::new(
            name,
            p("gc", 1),
            1,
            world(
                "edge(a,b). edge(b,c). edge(b,d). edge(c,e). edge(e,f). edge(a,g). edge(d,h). edge(b,i). edge(b,m).
                 color(a,green). color(b,red). color(c,green). color(d,green). color(e,red).
                 color(f,red). color(g,green). color(h,green). color(i,red). color(m,green).",
            ),
            world("gc(e). gc(f). gc(a). gc(g). gc(d). gc(h). gc(i). gc(b)."),
        )),
        "connectedness" => with_renamed_test(TaskSpec::new(
            name,
            p("connectedness", 2),
            1,
            world("edge(a,b). edge(b,c). edge(c,d). edge(b,a)."),
            world(
                "connectedness(a,b). connectedness(b,c). connectedness(c,d). connectedness(b,a).
                 connectedness(a,c). connectedness(a,d). connectedness(a,a). connectedness(b,d).
                 connectedness(b,b).",
            ),
        )),
        "cyclic" => with_renamed_test(TaskSpec::new(
            name,
            p("cyclic", 1),
            1,
            world("edge(a,b). edge(b,c). edge(c,a). edge(b,d). edge(d,e). edge(d,f). edge(e,f). edge(f,e)."),
            world("cyclic(a). cyclic(b). cyclic(c). cyclic(e). cyclic(f)."),
        )),
        _ => return Err(UnknownTask(name.to_string())),
    };
    Ok(spec)
}

fn parents(atoms: &BTreeSet<Atom>) -> Vec<(String, String)> {
    atoms
        .iter()
        .filter(|a| a.predicate.name == "m" || a.predicate.name == "f")
        .map(|a| (a.args[0].label().to_string(), a.args[1].label().to_string()))
        .collect()
}

fn is_grandparent(atoms: &BTreeSet<Atom>, x: &str, y: &str) -> bool {
    let ps = parents(atoms);
    ps.iter()
        .filter(|(a, _)| a == x)
        .any(|(_, z)| ps.iter().any(|(b, c)| b == z && c == y))
}

/// Three-generation family with mother (`m`) and father (`f`) facts; the
/// test family is disjoint and deeper.
fn grandparent() -> TaskSpec {
    let background = world(
        "f(adam,bob). m(alice,bob). f(adam,carol). m(alice,carol).
         f(bob,dave). m(beth,dave). f(bob,erin). m(beth,erin).
         m(carol,fred). f(carl,fred). m(carol,gina). f(carl,gina).
         f(dave,hank). m(dana,hank). m(erin,ivy). f(eric,ivy).
         m(gina,jack). f(glen,jack).",
    );
    let atoms = background.true_atoms();
    let people: Vec<String> = background.constants().into_iter().collect();
    let mut positives = FactSet::new();
    for x in &people {
        for y in &people {
            if is_grandparent(&atoms, x, y) {
                positives.insert_crisp(a2("g", x, y));
            }
        }
    }
    let spec = TaskSpec::new("grandparent", Predicate::new("g", 2), 1, background, positives);
    let test = world(
        "f(otto,paul). m(olga,paul). f(otto,rita). m(olga,rita).
         f(paul,sam). m(sara,sam). m(rita,tina). f(tom,tina). m(rita,uma). f(tom,uma).
         f(sam,vic). m(vera,vic). m(tina,walt). f(will,walt). f(vic,xena). m(yara,xena).",
    );
    with_test_world(spec, test, |atoms, args| is_grandparent(atoms, args[0], args[1]))
}

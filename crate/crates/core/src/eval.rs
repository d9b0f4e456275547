//! Test-set metrics and noise injection.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ground::Database;
use crate::logic::{closure_in_place, Atom, FactSet, LogicProgram, Term};
use crate::task::{atom_key, GaussianNoise, TaskSpec};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("the test set has no positive examples")]
    EmptyTestSet,
    #[error("rank metrics need binary test facts, got {0}")]
    NotBinary(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub positives_covered: usize,
    pub positives_total: usize,
    pub negatives_entailed: usize,
    pub negatives_total: usize,
}

fn eval_database(spec: &TaskSpec, program: &LogicProgram) -> Database {
    let mut db = Database::from_factset(&spec.evaluation_facts());
    for a in spec.test_positives.atoms().chain(spec.test_negatives.atoms()) {
        for c in a.constants() {
            db.intern(c);
        }
    }
    closure_in_place(program, &mut db);
    db
}

/// Coverage of the test positives (and, for reference, test negatives) by
/// the closure of the program over the training facts plus test background.
pub fn evaluate(program: &LogicProgram, spec: &TaskSpec) -> Result<AccuracyReport, EvalError> {
    if spec.test_positives.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let db = eval_database(spec, program);
    let covered = spec.test_positives.atoms().filter(|a| db.contains_atom(a)).count();
    let entailed = spec.test_negatives.atoms().filter(|a| db.contains_atom(a)).count();
    Ok(AccuracyReport {
        accuracy: covered as f64 / spec.test_positives.len() as f64,
        positives_covered: covered,
        positives_total: spec.test_positives.len(),
        negatives_entailed: entailed,
        negatives_total: spec.test_negatives.len(),
    })
}

pub fn accuracy(program: &LogicProgram, spec: &TaskSpec) -> Result<f64, EvalError> {
    evaluate(program, spec).map(|r| r.accuracy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    pub query: Atom,
    /// Which argument was replaced: 1 for the object, 0 for the subject.
    pub position: usize,
    pub rank: f64,
    pub hits: BTreeMap<u32, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub queries: usize,
}

impl RankMetrics {
    pub const CSV_HEADER: &'static str = "queries,MRR,HITS@1,HITS@3,HITS@10";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6}",
            self.queries, self.mrr, self.hits1, self.hits3, self.hits10
        )
    }
}

/// Mean-rank position of the true answer: everything strictly better, plus
/// the middle of its tie group.
fn tie_rank(better: usize, ties_incl_self: usize) -> f64 {
    better as f64 + (ties_incl_self as f64 + 1.0) / 2.0
}

/// Ranks every test fact in both directions under the filtered protocol.
pub fn rank_queries(program: &LogicProgram, facts: &FactSet, test: &FactSet) -> Result<Vec<RankResult>, EvalError> {
    if let Some(a) = test.atoms().find(|a| a.args.len() != 2) {
        return Err(EvalError::NotBinary(a.to_string()));
    }
    let mut db = Database::from_factset(facts);
    let mut entities: BTreeSet<String> = facts.constants();
    entities.extend(test.constants());
    for e in &entities {
        db.intern(e);
    }
    closure_in_place(program, &mut db);
    let known: HashSet<&Atom> = facts.atoms().filter(|a| facts.holds(a)).chain(test.atoms()).collect();

    let mut out = Vec::new();
    for query in test.atoms() {
        for position in [1usize, 0] {
            let truth = query.args[position].label();
            let truth_entailed = db.contains_atom(query);
            let (mut better, mut ties) = (0usize, 1usize);
            for e in &entities {
                if e == truth {
                    continue;
                }
                let mut cand = query.clone();
                cand.args[position] = Term::constant(e.as_str());
                if known.contains(&cand) {
                    continue;
                }
                let entailed = db.contains_atom(&cand);
                if entailed == truth_entailed {
                    ties += 1;
                } else if entailed {
                    better += 1;
                }
            }
            let rank = tie_rank(better, ties);
            out.push(RankResult {
                query: query.clone(),
                position,
                rank,
                hits: [1, 3, 10].into_iter().map(|m| (m, rank <= m as f64)).collect(),
            });
        }
    }
    Ok(out)
}

pub fn summarize(results: &[RankResult]) -> RankMetrics {
    let n = results.len().max(1) as f64;
    let hits = |m: u32| results.iter().filter(|r| r.hits[&m]).count() as f64 / n;
    RankMetrics {
        mrr: results.iter().map(|r| 1.0 / r.rank).sum::<f64>() / n,
        hits1: hits(1),
        hits3: hits(3),
        hits10: hits(10),
        queries: results.len(),
    }
}

pub fn rank_metrics(program: &LogicProgram, facts: &FactSet, test: &FactSet) -> Result<RankMetrics, EvalError> {
    rank_queries(program, facts, test).map(|r| summarize(&r))
}

/// Marks the training data as observed through Gaussian truth noise. The
/// atoms are unchanged; only the weights seen by the network move.
pub fn inject_gaussian_noise(spec: &TaskSpec, sigma: f64, seed: u64) -> TaskSpec {
    assert!(sigma >= 0.0 && sigma.is_finite(), "sigma must be finite and non-negative");
    let mut out = spec.clone();
    out.gaussian = Some(GaussianNoise { sigma, seed });
    out
}

/// Flips the label of every target atom over the training entities with
/// probability `mu`: positives become negatives and closed-world negatives
/// become positives.
pub fn inject_label_noise(spec: &TaskSpec, mu: f64, seed: u64) -> TaskSpec {
    assert!((0.0..=1.0).contains(&mu), "mu must lie in [0, 1]");
    if mu == 0.0 {
        return spec.clone();
    }
    let entities = spec.entities();
    let flip = |atom: &Atom| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ atom_key(atom).rotate_left(17));
        rng.gen::<f64>() < mu
    };
    let mut positives = FactSet::new();
    let mut visit = |args: &[&str]| {
        let atom = Atom::ground(&spec.target.name, args);
        let was = spec.positives.holds(&atom);
        if was != flip(&atom) {
            positives.insert_crisp(atom);
        }
    };
    match spec.target.arity {
        1 => entities.iter().for_each(|e| visit(&[e])),
        _ => {
            for a in &entities {
                for b in &entities {
                    visit(&[a, b]);
                }
            }
        }
    }
    let mut out = spec.clone();
    out.positives = positives;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Rule;

    fn fact(p: &str, a: &str, b: &str) -> Atom {
        Atom::ground(p, &[a, b])
    }

    #[test]
    fn tie_rank_rule() {
        assert_eq!(tie_rank(0, 1), 1.0);
        assert_eq!(tie_rank(0, 4), 2.5);
        assert_eq!(tie_rank(2, 1), 3.0);
    }

    #[test]
    fn empty_program_ties_everything() {
        let facts: FactSet = [fact("r", "a", "b"), fact("r", "c", "d")].into_iter().collect();
        let test: FactSet = [fact("r", "a", "c")].into_iter().collect();
        let res = rank_queries(&LogicProgram::new(), &facts, &test).unwrap();
        // object query: pool {a, c, d} after filtering r(a,b)
        assert_eq!(res[0].rank, 2.0);
        // subject query: nothing filtered, pool {a, b, c, d}
        assert_eq!(res[1].rank, 2.5);
    }

    #[test]
    fn exact_program_ranks_first() {
        let facts: FactSet = [fact("e", "a", "b")].into_iter().collect();
        let test: FactSet = [fact("r", "a", "b")].into_iter().collect();
        let prog: LogicProgram = [Rule::new(Atom::unground("r", &["X", "Y"]), [Atom::unground("e", &["X", "Y"])])]
            .into_iter()
            .collect();
        let m = rank_metrics(&prog, &facts, &test).unwrap();
        assert_eq!(m.mrr, 1.0);
        assert_eq!(m.hits1, 1.0);
    }

    #[test]
    fn label_noise_zero_and_one() {
        let mut b = FactSet::new();
        b.insert_crisp(fact("succ", "0", "1"));
        let p: FactSet = [fact("pre", "1", "0")].into_iter().collect();
        let spec = TaskSpec::new("pre", crate::logic::Predicate::new("pre", 2), 0, b, p);
        assert_eq!(inject_label_noise(&spec, 0.0, 1), spec);
        let flipped = inject_label_noise(&spec, 1.0, 1);
        assert_eq!(flipped.positives.len(), 3);
        assert!(!flipped.positives.contains(&fact("pre", "1", "0")));
    }

    #[test]
    fn gaussian_keeps_atoms() {
        let p: FactSet = [fact("pre", "1", "0")].into_iter().collect();
        let spec = TaskSpec::new("pre", crate::logic::Predicate::new("pre", 2), 0, FactSet::new(), p);
        let noisy = inject_gaussian_noise(&spec, 2.0, 5);
        assert_eq!(
            noisy.training_facts().atoms().collect::<Vec<_>>(),
            spec.training_facts().atoms().collect::<Vec<_>>()
        );
    }
}

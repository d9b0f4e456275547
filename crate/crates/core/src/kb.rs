//! Knowledge-base completion: learn one program per relation and rank entities.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::extract::{sort_rules, ScoredRule};
use crate::io::parse_triples;
use crate::logic::{Atom, FactSet, LogicProgram, Predicate};
use crate::pipeline::{learn, LearnConfig, PipelineError, RunSummary};
use crate::task::TaskSpec;

/// The UMLS triples (train, validation and test files of the usual release, merged).
pub const UMLS_TRIPLES: &str = include_str!("../data/umls.tsv");

pub fn umls() -> FactSet {
    parse_triples(UMLS_TRIPLES).expect("bundled UMLS triples parse")
}

/// Shuffles the facts with `seed` and holds out `test_fraction` of them.
/// Returns `(train, test)`.
pub fn split(facts: &FactSet, test_fraction: f64, seed: u64) -> (FactSet, FactSet) {
    let mut atoms: Vec<Atom> = facts.true_atoms().into_iter().collect();
    atoms.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (atoms.len() as f64 * test_fraction).round() as usize;
    let test = atoms[..n_test].iter().cloned().collect();
    let train = atoms[n_test..].iter().cloned().collect();
    (train, test)
}

/// Task for one relation: its facts are the positives, everything else is background.
pub fn relation_task(facts: &FactSet, target: &Predicate, depth: usize) -> TaskSpec {
    let mut background = FactSet::new();
    let mut positives = FactSet::new();
    for (atom, w) in facts.iter() {
        if atom.predicate == *target {
            positives.insert(atom.clone(), w);
        } else {
            background.insert(atom.clone(), w);
        }
    }
    TaskSpec::new(target.name.clone(), target.clone(), depth, background, positives)
}

#[derive(Debug, Clone)]
pub struct KbOutcome {
    pub rules: Vec<ScoredRule>,
    pub summaries: Vec<RunSummary>,
    /// Loss histories per relation, as `(relation, csv without header)`.
    pub losses: Vec<(String, String)>,
}

impl KbOutcome {
    pub fn program(&self) -> LogicProgram {
        self.rules.iter().map(|r| r.rule.clone()).collect()
    }
}

/// Learns a program for every binary relation of `facts` and merges them.
pub fn learn_all_relations(facts: &FactSet, depth: usize, config: &LearnConfig) -> Result<KbOutcome, PipelineError> {
    let mut rules = Vec::new();
    let mut summaries = Vec::new();
    let mut losses = Vec::new();
    for target in facts.predicates().into_iter().filter(|p| p.arity == 2) {
        let spec = relation_task(facts, &target, depth);
        let outcome = learn(&spec, config)?;
        log::info!("{target}: {} sound rules", outcome.rules.len());
        let csv = outcome.loss_csv();
        losses.push((target.name.clone(), csv.lines().skip(1).map(|l| format!("{l}\n")).collect()));
        rules.extend(outcome.rules);
        summaries.push(outcome.summary);
    }
    sort_rules(&mut rules);
    Ok(KbOutcome {
        rules,
        summaries,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn umls_statistics() {
        let facts = umls();
        assert_eq!(facts.len(), 6529);
        assert_eq!(facts.predicates().len(), 46);
        assert_eq!(facts.constants().len(), 135);
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let facts = umls();
        let (train, test) = split(&facts, 0.1, 0);
        assert_eq!(test.len(), 653);
        assert_eq!(train.len() + test.len(), facts.len());
        assert!(test.atoms().all(|a| !train.contains(a)));
        assert_eq!(split(&facts, 0.1, 0).1, test);
        assert_ne!(split(&facts, 0.1, 1).1, test);
    }

    #[test]
    fn relation_task_separates_target() {
        let facts: FactSet = [Atom::ground("r", &["a", "b"]), Atom::ground("s", &["b", "c"])]
            .into_iter()
            .collect();
        let spec = relation_task(&facts, &Predicate::new("r", 2), 1);
        assert_eq!(spec.positives.len(), 1);
        assert_eq!(spec.background.len(), 1);
    }
}

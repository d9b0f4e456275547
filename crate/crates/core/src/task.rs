//! Learning tasks: target predicate, variable depth, training and test data,
//! and the noise model applied to what the learner sees.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::logic::{Atom, FactSet, Predicate, Term};

/// Gaussian truth noise on training data. Every training fact is observed
/// with weight `clamp(min(1 - e, 1))` and every closed-world negative of the
/// target with weight `clamp(max(e, 0))`, where `e ~ N(0, sigma^2)` is drawn
/// from a stream keyed by `(seed, atom)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianNoise {
    pub sigma: f64,
    pub seed: u64,
}

impl GaussianNoise {
    fn epsilon(&self, atom: &Atom) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ atom_key(atom));
        Normal::new(0.0, self.sigma)
            .expect("sigma is finite and non-negative")
            .sample(&mut rng)
    }

    pub fn positive_weight(&self, atom: &Atom) -> f64 {
        (1.0 - self.epsilon(atom)).min(1.0).clamp(0.0, 1.0)
    }

    pub fn negative_weight(&self, atom: &Atom) -> f64 {
        self.epsilon(atom).max(0.0).clamp(0.0, 1.0)
    }
}

/// FNV-1a over the atom's printed form; stable across runs and platforms.
pub(crate) fn atom_key(atom: &Atom) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    feed(atom.predicate.name.as_bytes());
    for t in &atom.args {
        feed(&[0x1f]);
        feed(t.label().as_bytes());
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    pub target: Predicate,
    pub depth: usize,
    pub background: FactSet,
    pub positives: FactSet,
    /// Extra background available at test time only (e.g. `succ` facts over
    /// the held-out number range).
    pub test_background: FactSet,
    pub test_positives: FactSet,
    pub test_negatives: FactSet,
    pub gaussian: Option<GaussianNoise>,
}

impl TaskSpec {
    pub fn new(name: impl Into<String>, target: Predicate, depth: usize, background: FactSet, positives: FactSet) -> Self {
        debug_assert!(positives.atoms().all(|a| a.predicate == target));
        TaskSpec {
            name: name.into(),
            target,
            depth,
            background,
            positives,
            test_background: FactSet::new(),
            test_positives: FactSet::new(),
            test_negatives: FactSet::new(),
            gaussian: None,
        }
    }

    /// Observed training facts `F = B ∪ P`, crisp as given. Soundness of
    /// extracted rules is judged against this set.
    pub fn observed_facts(&self) -> FactSet {
        self.background.union(&self.positives)
    }

    /// Training facts with the weights the network trains on.
    pub fn training_facts(&self) -> FactSet {
        let mut f = self.observed_facts();
        if let Some(noise) = &self.gaussian {
            for (atom, w) in f.weights_mut() {
                *w = noise.positive_weight(atom);
            }
        }
        f
    }

    /// Weight of a ground atom as seen by the network: noisy weight for
    /// training facts, noisy closed-world weight for absent target atoms,
    /// zero otherwise.
    pub fn training_weight(&self, facts: &FactSet, atom: &Atom) -> f64 {
        match &self.gaussian {
            None => facts.weight(atom),
            Some(noise) => {
                if facts.contains(atom) {
                    noise.positive_weight(atom)
                } else if atom.predicate == self.target {
                    noise.negative_weight(atom)
                } else {
                    0.0
                }
            }
        }
    }

    /// Constants of the training facts, sorted.
    pub fn entities(&self) -> Vec<String> {
        self.observed_facts().constants().into_iter().collect()
    }

    /// Predicates of the training facts plus the target.
    pub fn predicates(&self) -> BTreeSet<Predicate> {
        let mut p = self.background.predicates();
        p.extend(self.positives.predicates());
        p.insert(self.target.clone());
        p
    }

    /// Facts available when evaluating on the test set.
    pub fn evaluation_facts(&self) -> FactSet {
        self.observed_facts().union(&self.test_background)
    }

    /// The unground target atom `p(X,Y)` or `p(X)`.
    pub fn target_atom(&self) -> Atom {
        let vars = ["X", "Y"];
        Atom {
            predicate: self.target.clone(),
            args: vars[..self.target.arity as usize]
                .iter()
                .map(|v| Term::var(*v))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_key_is_stable() {
        let a = Atom::ground("succ", &["0", "1"]);
        assert_eq!(atom_key(&a), atom_key(&a.clone()));
        assert_ne!(atom_key(&a), atom_key(&Atom::ground("succ", &["01"])));
    }

    #[test]
    fn zero_sigma_is_noise_free() {
        let n = GaussianNoise { sigma: 0.0, seed: 3 };
        let a = Atom::ground("p", &["a"]);
        assert_eq!(n.positive_weight(&a), 1.0);
        assert_eq!(n.negative_weight(&a), 0.0);
    }

    #[test]
    fn large_sigma_weights_stay_in_unit_interval() {
        let n = GaussianNoise { sigma: 10.0, seed: 1 };
        for i in 0..200 {
            let a = Atom::ground("p", &[&i.to_string()]);
            assert!((0.0..=1.0).contains(&n.positive_weight(&a)));
            assert!((0.0..=1.0).contains(&n.negative_weight(&a)));
        }
    }
}

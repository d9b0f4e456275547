//! Propositionalization: turns relational facts into pairs of interpretation
//! vectors over a fixed space of unground body features.
//!
//! For a target `p(X,Y)` with variable depth `d` the variables are
//! `[X, Y, Z, W, ...]` and the candidate features are every binary atom over
//! an ordered pair of distinct variables plus every unary atom over a single
//! variable, minus the target atom itself. Each substitution drawn from the
//! variable domains yields one pair `(v_i, v_o)`: the truth of every grounded
//! feature, and the truth of the grounded target.

use std::collections::HashMap;

use crate::logic::{Atom, Predicate, Substitution, Term};
use crate::task::TaskSpec;

/// Names given to existential variables, in order.
const EXISTENTIAL_NAMES: [&str; 6] = ["Z", "W", "U", "V", "T", "S"];

/// Default cap on the number of substitutions.
pub const DEFAULT_SUBSTITUTION_CAP: u64 = 50_000_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PropositionalizeError {
    #[error("substitution space has {size} tuples, above the cap of {cap}; lower the variable depth")]
    SubstitutionOverflow { size: u128, cap: u64 },
    #[error("feature space was built for {expected}, task targets {got}")]
    TargetMismatch { expected: String, got: String },
}

/// `[X, Y]` followed by `depth` existentials. A unary target keeps `Y`,
/// which then acts as one more existential.
fn variable_names(depth: usize) -> Vec<String> {
    let mut v = vec!["X".to_string(), "Y".to_string()];
    for i in 0..depth {
        v.push(
            EXISTENTIAL_NAMES
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("V{}", i + 1)),
        );
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpace {
    pub target: Atom,
    pub variables: Vec<String>,
    pub all_features: Vec<Atom>,
    pub valid_mask: Vec<bool>,
    pub valid_features: Vec<Atom>,
}

impl FeatureSpace {
    /// Number of valid features, `C`.
    pub fn width(&self) -> usize {
        self.valid_features.len()
    }

    /// Indices into `all_features` of the valid features, in order.
    pub fn valid_indices(&self) -> Vec<usize> {
        (0..self.all_features.len()).filter(|&i| self.valid_mask[i]).collect()
    }

    pub fn head_arity(&self) -> usize {
        self.target.args.len()
    }

    /// Variables of the head atom.
    pub fn head_variables(&self) -> &[String] {
        &self.variables[..self.head_arity()]
    }

    /// Variables that do not appear in the head.
    pub fn existential_variables(&self) -> &[String] {
        &self.variables[self.head_arity()..]
    }

    fn set_mask(&mut self, mask: Vec<bool>) {
        self.valid_features = self
            .all_features
            .iter()
            .zip(&mask)
            .filter(|(_, keep)| **keep)
            .map(|(a, _)| a.clone())
            .collect();
        self.valid_mask = mask;
    }

    /// Closed-form size of the unpruned feature space:
    /// `A(|V|,2) * n_b + |V| * n_u - 1`.
    pub fn expected_count(n_vars: usize, n_binary: usize, n_unary: usize) -> usize {
        n_vars * (n_vars.saturating_sub(1)) * n_binary + n_vars * n_unary - 1
    }
}

pub fn enumerate_features(target: &Predicate, depth: usize, predicates: &[Predicate]) -> FeatureSpace {
    let variables = variable_names(depth);
    let target_atom = Atom {
        predicate: target.clone(),
        args: variables[..target.arity as usize]
            .iter()
            .map(|v| Term::var(v.clone()))
            .collect(),
    };
    let mut preds: Vec<Predicate> = predicates.iter().filter(|p| *p != target).cloned().collect();
    preds.sort();
    preds.dedup();
    // the target's own features come last
    preds.push(target.clone());

    let mut features = Vec::new();
    for p in &preds {
        match p.arity {
            2 => {
                for a in &variables {
                    for b in &variables {
                        if a != b {
                            features.push(Atom {
                                predicate: p.clone(),
                                args: vec![Term::var(a.clone()), Term::var(b.clone())],
                            });
                        }
                    }
                }
            }
            _ => {
                for a in &variables {
                    features.push(Atom {
                        predicate: p.clone(),
                        args: vec![Term::var(a.clone())],
                    });
                }
            }
        }
    }
    features.retain(|f| *f != target_atom);
    let n = features.len();
    FeatureSpace {
        target: target_atom,
        variables,
        valid_features: features.clone(),
        all_features: features,
        valid_mask: vec![true; n],
    }
}

/// Feature space for a task over every predicate it mentions.
pub fn features_for(spec: &TaskSpec) -> FeatureSpace {
    let preds: Vec<Predicate> = spec.predicates().into_iter().collect();
    enumerate_features(&spec.target, spec.depth, &preds)
}

/// One training example. Inputs are stored sparsely as `(column, weight)`
/// with strictly increasing columns; [`TrainingPair::v_i`] gives the dense form.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub inputs: Vec<(u32, f64)>,
    pub v_o: f64,
    pub substitution: Substitution,
    /// Number of generated pairs this one stands for after deduplication.
    pub count: u32,
}

impl TrainingPair {
    pub fn v_i(&self, width: usize) -> Vec<f64> {
        let mut v = vec![0.0; width];
        for &(j, w) in &self.inputs {
            v[j as usize] = w;
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropositionalizeOptions {
    pub substitution_cap: u64,
    pub deduplicate: bool,
}

impl Default for PropositionalizeOptions {
    fn default() -> Self {
        PropositionalizeOptions {
            substitution_cap: DEFAULT_SUBSTITUTION_CAP,
            deduplicate: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Propositionalized {
    pub pairs: Vec<TrainingPair>,
    pub features: FeatureSpace,
    /// `|S|` before examination.
    pub substitutions: u64,
}

/// Dense truth tables for every predicate in the feature space.
struct Tables {
    entities: Vec<String>,
    tables: HashMap<Predicate, Vec<f64>>,
}

impl Tables {
    fn build(spec: &TaskSpec, features: &FeatureSpace) -> Self {
        let entities = spec.entities();
        let index: HashMap<&str, usize> = entities.iter().enumerate().map(|(i, e)| (e.as_str(), i)).collect();
        let n = entities.len();
        let facts = spec.observed_facts();
        let mut tables: HashMap<Predicate, Vec<f64>> = HashMap::new();
        let mut preds: Vec<&Predicate> = features.all_features.iter().map(|a| &a.predicate).collect();
        preds.push(&features.target.predicate);
        for p in preds {
            if tables.contains_key(p) {
                continue;
            }
            let size = if p.arity == 2 { n * n } else { n };
            let mut t = vec![0.0; size];
            for (atom, _) in facts.with_predicate(p) {
                let idx = atom
                    .args
                    .iter()
                    .fold(0, |acc, a| acc * n + index[a.label()]);
                t[idx] = spec.training_weight(&facts, atom);
            }
            if spec.gaussian.is_some() && *p == spec.target {
                // closed-world negatives of the target get noisy weights too
                for (idx, slot) in t.iter_mut().enumerate() {
                    let args: Vec<&str> = if p.arity == 2 {
                        vec![&entities[idx / n], &entities[idx % n]]
                    } else {
                        vec![&entities[idx]]
                    };
                    let atom = Atom::ground(&p.name, &args);
                    if !facts.contains(&atom) {
                        *slot = spec.training_weight(&facts, &atom);
                    }
                }
            }
            tables.insert(p.clone(), t);
        }
        Tables { entities, tables }
    }

    fn n(&self) -> usize {
        self.entities.len()
    }
}

/// A feature compiled to a table lookup over bound variable positions.
struct Lookup<'a> {
    table: &'a [f64],
    slots: [usize; 2],
    binary: bool,
}

impl Lookup<'_> {
    #[inline]
    fn get(&self, binding: &[usize], n: usize) -> f64 {
        if self.binary {
            self.table[binding[self.slots[0]] * n + binding[self.slots[1]]]
        } else {
            self.table[binding[self.slots[0]]]
        }
    }
}

fn compile_lookup<'a>(atom: &Atom, variables: &[String], tables: &'a Tables) -> Lookup<'a> {
    let pos = |t: &Term| variables.iter().position(|v| v == t.label()).expect("feature variable");
    let binary = atom.args.len() == 2;
    Lookup {
        table: &tables.tables[&atom.predicate],
        slots: [pos(&atom.args[0]), if binary { pos(&atom.args[1]) } else { 0 }],
        binary,
    }
}

/// Variable domains as entity indices, in variable order.
fn domains(spec: &TaskSpec, features: &FeatureSpace, tables: &Tables) -> Vec<Vec<usize>> {
    let index: HashMap<&str, usize> = tables.entities.iter().enumerate().map(|(i, e)| (e.as_str(), i)).collect();
    let all: Vec<usize> = (0..tables.n()).collect();
    let mut x = std::collections::BTreeSet::new();
    let mut y = std::collections::BTreeSet::new();
    for atom in spec.positives.atoms() {
        x.insert(index[atom.args[0].label()]);
        if atom.args.len() == 2 {
            y.insert(index[atom.args[1].label()]);
        }
    }
    let mut out = vec![x.into_iter().collect::<Vec<_>>()];
    if spec.target.arity == 2 {
        out.push(y.into_iter().collect());
    } else {
        out.push(all.clone());
    }
    for _ in 2..features.variables.len() {
        out.push(all.clone());
    }
    out
}

/// Runs generation and calls `visit(binding, v_i, v_o)` for every
/// substitution in canonical order, with `v_i` dense over `all_features`.
fn generate(
    spec: &TaskSpec,
    features: &FeatureSpace,
    cap: u64,
    mut visit: impl FnMut(&[usize], &[f64], f64),
) -> Result<(Tables, u64), PropositionalizeError> {
    if features.target.predicate != spec.target {
        return Err(PropositionalizeError::TargetMismatch {
            expected: features.target.predicate.to_string(),
            got: spec.target.to_string(),
        });
    }
    let tables = Tables::build(spec, features);
    let doms = domains(spec, features, &tables);
    let size: u128 = doms.iter().map(|d| d.len() as u128).product();
    if size > cap as u128 {
        return Err(PropositionalizeError::SubstitutionOverflow { size, cap });
    }
    let n = tables.n();
    let lookups: Vec<Lookup> = features
        .all_features
        .iter()
        .map(|f| compile_lookup(f, &features.variables, &tables))
        .collect();
    let target = compile_lookup(&features.target, &features.variables, &tables);
    let mut binding = vec![0usize; doms.len()];
    let mut v_i = vec![0.0; lookups.len()];
    if size > 0 {
        let mut cursor = vec![0usize; doms.len()];
        loop {
            for (b, (c, d)) in binding.iter_mut().zip(cursor.iter().zip(&doms)) {
                *b = d[*c];
            }
            for (slot, l) in v_i.iter_mut().zip(&lookups) {
                *slot = l.get(&binding, n);
            }
            visit(&binding, &v_i, target.get(&binding, n));
            // odometer increment, last variable fastest
            let mut k = doms.len();
            loop {
                if k == 0 {
                    return Ok((tables, size as u64));
                }
                k -= 1;
                cursor[k] += 1;
                if cursor[k] < doms[k].len() {
                    break;
                }
                cursor[k] = 0;
            }
        }
    }
    Ok((tables, size as u64))
}

fn substitution_of(binding: &[usize], features: &FeatureSpace, tables: &Tables) -> Substitution {
    let mut s = Substitution::new();
    for (v, &e) in features.variables.iter().zip(binding) {
        s.bind(v.clone(), tables.entities[e].clone());
    }
    s
}

/// Generation only: one dense pair per substitution, no examination.
pub fn generate_pairs(
    spec: &TaskSpec,
    features: &FeatureSpace,
    cap: u64,
) -> Result<Vec<(Vec<f64>, f64, Vec<usize>)>, PropositionalizeError> {
    let mut out = Vec::new();
    generate(spec, features, cap, |b, v_i, v_o| out.push((v_i.to_vec(), v_o, b.to_vec())))?;
    Ok(out)
}

/// Generation followed by examination: pairs with an all-zero input are
/// dropped, then feature columns that are zero in every surviving pair.
pub fn propositionalize(
    spec: &TaskSpec,
    features: &FeatureSpace,
    options: PropositionalizeOptions,
) -> Result<Propositionalized, PropositionalizeError> {
    let mut kept: Vec<(Vec<(u32, f64)>, f64, Vec<usize>, u32)> = Vec::new();
    let mut seen: HashMap<(Vec<(u32, u64)>, u64), usize> = HashMap::new();
    let mut used = vec![false; features.all_features.len()];
    let (tables, substitutions) = generate(spec, features, options.substitution_cap, |b, v_i, v_o| {
        let sparse: Vec<(u32, f64)> = v_i
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(j, w)| (j as u32, *w))
            .collect();
        if sparse.is_empty() {
            return;
        }
        if options.deduplicate {
            let key = (
                sparse.iter().map(|(j, w)| (*j, w.to_bits())).collect::<Vec<_>>(),
                v_o.to_bits(),
            );
            if let Some(&i) = seen.get(&key) {
                kept[i].3 += 1;
                return;
            }
            seen.insert(key, kept.len());
        }
        for (j, _) in &sparse {
            used[*j as usize] = true;
        }
        kept.push((sparse, v_o, b.to_vec(), 1));
    })?;
    drop(seen);

    // only features selected by the mask may survive
    let mask: Vec<bool> = used
        .iter()
        .zip(&features.valid_mask)
        .map(|(u, v)| *u && *v)
        .collect();
    let mut remap = vec![u32::MAX; mask.len()];
    let mut next = 0u32;
    for (j, keep) in mask.iter().enumerate() {
        if *keep {
            remap[j] = next;
            next += 1;
        }
    }
    let mut out_features = features.clone();
    out_features.set_mask(mask);

    let pairs = kept
        .into_iter()
        .filter_map(|(sparse, v_o, b, count)| {
            let inputs: Vec<(u32, f64)> = sparse
                .into_iter()
                .filter(|(j, _)| remap[*j as usize] != u32::MAX)
                .map(|(j, w)| (remap[j as usize], w))
                .collect();
            if inputs.is_empty() {
                return None;
            }
            Some(TrainingPair {
                inputs,
                v_o,
                substitution: substitution_of(&b, features, &tables),
                count,
            })
        })
        .collect();
    Ok(Propositionalized {
        pairs,
        features: out_features,
        substitutions,
    })
}

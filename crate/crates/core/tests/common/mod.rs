//! Random instances shared by several test targets.

#![allow(dead_code)]

use std::collections::BTreeSet;

use folearn::engine::{loss_and_gradient, loss_vector, total_loss, EmbeddingTable, HyperParams, Matrix, PriorMatrix, RuleTensors};
use folearn::logic::{apply_substitution, tp_symbolic, tp_vectorized, Atom, LogicProgram, Predicate, Rule, Substitution};
use folearn::propositional::{enumerate_features, TrainingPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub tensors: RuleTensors,
    pub batch: Vec<TrainingPair>,
    pub emb: EmbeddingTable,
    pub prior: PriorMatrix,
    pub hp: HyperParams,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = rng.gen_range(3..=8);
    let mut tensors = RuleTensors::init(2, 2, 2, c, seed);
    // spread logits so that entries are not all near 0.5
    for x in tensors.logits_s.iter_mut().chain(tensors.logits_a.iter_mut()) {
        *x = rng.gen_range(-2.5..2.5);
    }
    let n = rng.gen_range(1..=10);
    let batch = (0..n)
        .map(|_| {
            let inputs: Vec<(u32, f64)> = (0..c)
                .filter_map(|j| rng.gen_bool(0.6).then(|| (j as u32, rng.gen_range(0.2..=1.0))))
                .collect();
            TrainingPair {
                inputs: if inputs.is_empty() { vec![(0, 1.0)] } else { inputs },
                v_o: if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.0..1.0) },
                substitution: Substitution::new(),
                count: 1,
            }
        })
        .collect();
    let emb = EmbeddingTable {
        basic: (0..c).map(|_| (0..2).map(|_| rng.gen_range(0..2) as f64).collect()).collect(),
        occurrence: (0..c).map(|_| (0..2).map(|_| rng.gen_range(0..2) as f64).collect()).collect(),
    };
    let prior_rows: Vec<Vec<f64>> = (0..rng.gen_range(0..3))
        .map(|_| (0..c).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let prior = PriorMatrix {
        rows: if prior_rows.is_empty() { Matrix::zeros(0, c) } else { Matrix::from_rows(&prior_rows) },
    };
    let hp = HyperParams {
        theta: [1.0, 0.1, 0.1, 0.1, 0.01, 0.01].map(|t: f64| t * rng.gen_range(0.5..2.0)),
        gamma: rng.gen_range(1.0..8.0),
        ..Default::default()
    };
    Instance {
        tensors,
        batch,
        emb,
        prior,
        hp,
    }
}

fn weighted(inst: &Instance, t: &RuleTensors) -> f64 {
    let l = loss_vector(t, &inst.batch, &inst.emb, &inst.prior, &inst.hp).unwrap();
    total_loss(&l, &inst.hp.theta)
}

/// Largest relative error over all parameters, with `max(|a|, |n|, 1e-6)` as denominator.
pub fn max_relative_error(inst: &Instance, h: f64) -> f64 {
    let (_, g) = loss_and_gradient(&inst.tensors, &inst.batch, &inst.emb, &inst.prior, &inst.hp).unwrap();
    let mut worst: f64 = 0.0;
    let n_s = inst.tensors.logits_s.len();
    for i in 0..n_s + inst.tensors.logits_a.len() {
        let mut plus = inst.tensors.clone();
        let mut minus = inst.tensors.clone();
        let (analytic, p, m) = if i < n_s {
            (g.logits_s[i], &mut plus.logits_s[i], &mut minus.logits_s[i])
        } else {
            (g.logits_a[i - n_s], &mut plus.logits_a[i - n_s], &mut minus.logits_a[i - n_s])
        };
        *p += h;
        *m -= h;
        let numeric = (weighted(inst, &plus) - weighted(inst, &minus)) / (2.0 * h);
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    worst
}

const CONSTANTS: [&str; 4] = ["a", "b", "c", "d"];

pub struct Case {
    pub program: LogicProgram,
    pub matrix: Vec<Vec<f64>>,
    pub features: Vec<Atom>,
    pub head: Atom,
    pub variables: Vec<String>,
    pub interp: BTreeSet<Atom>,
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = Predicate::new("h", 2);
    let preds = [Predicate::new("p", 2), Predicate::new("q", 2), Predicate::new("r", 1), target.clone()];
    let space = enumerate_features(&target, rng.gen_range(0..=1), &preds);
    let features = space.all_features.clone();
    let n_rules = rng.gen_range(1..=3);
    let mut program = LogicProgram::new();
    let mut matrix = Vec::new();
    for _ in 0..n_rules {
        let len = rng.gen_range(1..=3.min(features.len()));
        let body: Vec<usize> = rand::seq::index::sample(&mut rng, features.len(), len).into_vec();
        let mut row = vec![0.0; features.len()];
        for &j in &body {
            row[j] = 1.0 / len as f64;
        }
        matrix.push(row);
        program.push(Rule::new(space.target.clone(), body.iter().map(|&j| features[j].clone())));
    }
    let n_constants = rng.gen_range(1..=CONSTANTS.len());
    let constants = &CONSTANTS[..n_constants];
    let mut interp = BTreeSet::new();
    for p in &preds {
        for x in constants {
            if p.arity == 1 {
                if rng.gen_bool(0.4) {
                    interp.insert(Atom::ground(&p.name, &[x]));
                }
                continue;
            }
            for y in constants {
                if rng.gen_bool(0.3) {
                    interp.insert(Atom::ground(&p.name, &[x, y]));
                }
            }
        }
    }
    Case {
        program,
        matrix,
        features,
        head: space.target.clone(),
        variables: space.variables.clone(),
        interp,
    }
}

fn substitutions(vars: &[String], constants: &[String]) -> Vec<Substitution> {
    let mut out = vec![Substitution::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|s| constants.iter().map(move |c| s.clone().with(v, c)))
            .collect();
    }
    out
}

/// Compares the two operators on one random case.
pub fn tp_case_agrees(seed: u64) -> Result<(), String> {
    let case = random_case(seed);
    let derived = tp_symbolic(&case.program, &case.interp);
    let universe: Vec<String> = case
        .interp
        .iter()
        .flat_map(|a| a.constants().map(str::to_string))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut fired_heads = BTreeSet::new();
    for sub in substitutions(&case.variables, &universe) {
        let v_i: Vec<f64> = case
            .features
            .iter()
            .map(|f| if case.interp.contains(&apply_substitution(f, &sub).unwrap()) { 1.0 } else { 0.0 })
            .collect();
        let head = apply_substitution(&case.head, &sub).unwrap();
        if tp_vectorized(&case.matrix, &v_i).unwrap()[0] == 1.0 {
            if !derived.contains(&head) {
                return Err(format!("seed {seed}: {head} fires under {sub} but is not derived"));
            }
            fired_heads.insert(head);
        }
    }
    let symbolic: BTreeSet<Atom> = derived.into_iter().filter(|a| a.predicate.name == "h").collect();
    if fired_heads != symbolic {
        return Err(format!("seed {seed}: head sets differ for program\n{}", case.program));
    }
    Ok(())
}

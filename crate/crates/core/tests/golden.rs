//! Small worked examples with hand-checked values.

use approx::assert_abs_diff_eq;
use folearn::engine::{
    basic_scores, feature_embeddings, loss_vector_for_matrices, merge_concat, HyperParams, Matrix, PriorMatrix,
};
use folearn::logic::{Atom, FactSet, Predicate};
use folearn::propositional::{
    enumerate_features, features_for, generate_pairs, propositionalize, FeatureSpace, PropositionalizeOptions,
    TrainingPair,
};
use folearn::task::TaskSpec;

pub fn predecessor_pair() -> TaskSpec {
    let background: FactSet = [Atom::ground("succ", &["0", "1"]), Atom::ground("succ", &["1", "2"])]
        .into_iter()
        .collect();
    let positives: FactSet = [Atom::ground("pre", &["1", "0"]), Atom::ground("pre", &["2", "1"])]
        .into_iter()
        .collect();
    TaskSpec::new("pre", Predicate::new("pre", 2), 0, background, positives)
}

#[test]
fn predecessor_training_set() {
    let spec = predecessor_pair();
    let fs = features_for(&spec);
    let raw: Vec<(Vec<f64>, f64)> = generate_pairs(&spec, &fs, 100)
        .unwrap()
        .into_iter()
        .map(|(v, o, _)| (v, o))
        .collect();
    assert_eq!(
        raw,
        vec![
            (vec![0.0, 1.0, 0.0], 1.0),
            (vec![0.0, 0.0, 0.0], 0.0),
            (vec![0.0, 0.0, 0.0], 0.0),
            (vec![0.0, 1.0, 0.0], 1.0),
        ]
    );
    let out = propositionalize(&spec, &fs, PropositionalizeOptions::default()).unwrap();
    assert_eq!(out.features.valid_features, vec![Atom::unground("succ", &["Y", "X"])]);
    let examined: Vec<(Vec<f64>, f64)> = out.pairs.iter().map(|p| (p.v_i(1), p.v_o)).collect();
    assert_eq!(examined, vec![(vec![1.0], 1.0)]);
}

/// Target `p(X,Y)` with variables X, Y, Z and five valid features.
pub fn five_feature_space() -> FeatureSpace {
    let features: Vec<Atom> = [["X", "Z"], ["Y", "X"], ["Y", "Z"], ["Z", "X"], ["Z", "Y"]]
        .iter()
        .map(|v| Atom::unground("p", v))
        .collect();
    FeatureSpace {
        target: Atom::unground("p", &["X", "Y"]),
        variables: vec!["X".into(), "Y".into(), "Z".into()],
        valid_mask: vec![true; features.len()],
        all_features: features.clone(),
        valid_features: features,
    }
}

#[test]
fn embeddings_of_five_features() {
    let emb = feature_embeddings(&five_feature_space());
    let basic: Vec<Vec<f64>> = [[1., 0.], [1., 1.], [0., 1.], [1., 0.], [0., 1.]].map(|r| r.to_vec()).to_vec();
    let occurrence: Vec<Vec<f64>> = [[1.], [0.], [1.], [1.], [1.]].map(|r| r.to_vec()).to_vec();
    assert_eq!(emb.basic, basic);
    assert_eq!(emb.occurrence, occurrence);
}

#[test]
fn merged_rows_basic_and_occurrence_losses() {
    let s = Matrix::from_rows(&[vec![0.0, 0.95, 0.0, 0.03, 0.02]]);
    let a = Matrix::from_rows(&[vec![0.01, 0.90, 0.0, 0.04, 0.0], vec![0.05, 0.80, 0.20, 0.0, 0.0]]);
    let m = merge_concat(&s, &a, 2);
    assert_eq!(m.rows, 2);
    assert_eq!(m.row(0), s.row(0));
    for (got, want) in m.row(1).iter().zip([0.03, 0.85, 0.10, 0.02, 0.0]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }

    let fs = five_feature_space();
    let emb = feature_embeddings(&fs);
    let basic = basic_scores(&m, &emb);
    assert!((basic[0] - 0.90).abs() <= 0.005, "basic_1 = {}", basic[0]);
    assert!((basic[1] - 0.74).abs() <= 0.005, "basic_2 = {}", basic[1]);

    let hp = HyperParams::default();
    assert_eq!((hp.occ_a, hp.occ_b, hp.occ_c, hp.occ_d), (1.0, 1.0, 10.0, 1.0));
    let batch = vec![TrainingPair {
        inputs: vec![(1, 1.0)],
        v_o: 1.0,
        substitution: Default::default(),
        count: 1,
    }];
    let l = loss_vector_for_matrices(&m, &a, 2, &batch, &emb, &PriorMatrix::empty(5), &hp).unwrap();
    let l_o = l.0[3];
    assert!((l_o - 2.31e-3).abs() <= 0.05 * 2.31e-3, "L_O = {l_o}");
}

fn count(target: Predicate, depth: usize, preds: &[Predicate]) -> usize {
    enumerate_features(&target, depth, preds).all_features.len()
}

#[test]
fn feature_counts_follow_closed_form() {
    let b = |n: &str| Predicate::new(n, 2);
    let u = |n: &str| Predicate::new(n, 1);
    // (|V|, n_b, n_u) = (2, 2, 0)
    assert_eq!(count(b("pre"), 0, &[b("succ"), b("pre")]), 3);
    assert_eq!(FeatureSpace::expected_count(2, 2, 0), 3);
    // (3, 3, 0)
    assert_eq!(count(b("g"), 1, &[b("m"), b("f"), b("g")]), 17);
    assert_eq!(FeatureSpace::expected_count(3, 3, 0), 17);
    // (2, 1, 1)
    assert_eq!(count(b("r"), 0, &[b("r"), u("q")]), 3);
    assert_eq!(FeatureSpace::expected_count(2, 1, 1), 3);
}

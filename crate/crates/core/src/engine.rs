//! Differentiable rule matrices.
//!
//! Two trainable tensors encode a same-head program: `S` (m1 x C), one rule
//! per row, and `A` (m2 x n_a x C), whose `n_a` slices are averaged into one
//! rule per row. Both are stored as logits and squashed elementwise into
//! (0,1). The stacked matrix `M = [S; mean(A)]` drives a fuzzy forward pass
//!
//! ```text
//! v_out = 1 - prod_k (1 - phi(M[k] . v_in - 1)),   phi(x) = 1 / (1 + exp(-gamma x))
//! ```
//!
//! and six losses shape it: inference (BCE), row sum, basic variable
//! coverage, existential-variable occurrence, slice diversity inside `A`,
//! and dissimilarity from the prior rows of rules already found sound.
//! Gradients are computed analytically.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::propositional::{FeatureSpace, TrainingPair};

/// Predictions are clamped to `[BCE_EPS, 1 - BCE_EPS]` inside the BCE.
pub const BCE_EPS: f64 = 1e-7;

pub const LOSS_NAMES: [&str; 6] = ["L_I", "L_S", "L_B", "L_O", "L_F", "L_C"];

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("{component} is not finite ({value}); aborting")]
    NonFiniteLoss { component: &'static str, value: f64 },
    #[error("gradient of {component} is not finite")]
    NonFiniteGradient { component: &'static str },
    #[error("empty batch")]
    EmptyBatch,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|k| self.row(k).to_vec()).collect()
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub gamma: f64,
    pub occ_a: f64,
    pub occ_b: f64,
    pub occ_c: f64,
    pub occ_d: f64,
    pub theta: [f64; 6],
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub epochs: usize,
    pub curriculum_every: usize,
    /// Fresh initializations tried after the first epoch budget. With early
    /// stopping they are only used while the training positives are uncovered.
    pub restarts: usize,
    pub seed: u64,
    pub m1: usize,
    pub m2: usize,
    pub n_a: usize,
    /// Weight each deduplicated pair by the number of pairs it stands for.
    pub weight_by_count: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            gamma: 8.0,
            occ_a: 1.0,
            occ_b: 1.0,
            occ_c: 10.0,
            occ_d: 1.0,
            theta: [1.0, 0.1, 0.1, 0.1, 0.01, 0.01],
            lr: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            epochs: 2000,
            curriculum_every: 100,
            restarts: 0,
            seed: 0,
            m1: 4,
            m2: 4,
            n_a: 2,
            weight_by_count: false,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0) {
            return Err(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.occ_c > 0.0) {
            return Err(format!("occurrence c must be positive, got {}", self.occ_c));
        }
        if self.theta.iter().any(|t| !(*t >= 0.0)) {
            return Err("loss weights must be non-negative".into());
        }
        if self.m1 + self.m2 == 0 {
            return Err("at least one rule row is required".into());
        }
        if self.m2 > 0 && self.n_a == 0 {
            return Err("n_a must be positive when m2 > 0".into());
        }
        Ok(())
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `phi(x) = 1 / (1 + exp(-gamma x))`.
pub fn activation(x: f64, gamma: f64) -> f64 {
    logistic(gamma * x)
}

/// Product t-conorm; 0 on empty input.
pub fn fuzzy_or(xs: &[f64]) -> f64 {
    1.0 - xs.iter().map(|x| 1.0 - x).product::<f64>()
}

/// Product t-norm; 1 on empty input.
pub fn fuzzy_and(xs: &[f64]) -> f64 {
    xs.iter().product()
}

/// `F(x) = a exp(b - c (x - d)^2)`.
pub fn occurrence_measure(x: f64, hp: &HyperParams) -> f64 {
    hp.occ_a * (hp.occ_b - hp.occ_c * (x - hp.occ_d).powi(2)).exp()
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        dot / (nu * nv)
    }
}

/// Adds `scale * d cos(u, v) / du` into `grad`.
fn cosine_grad_u(u: &[f64], v: &[f64], scale: f64, grad: &mut [f64]) {
    let nu2: f64 = u.iter().map(|a| a * a).sum();
    let nv2: f64 = v.iter().map(|a| a * a).sum();
    if nu2 == 0.0 || nv2 == 0.0 {
        return;
    }
    let (nu, nv) = (nu2.sqrt(), nv2.sqrt());
    let cos = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / (nu * nv);
    for ((g, a), b) in grad.iter_mut().zip(u).zip(v) {
        *g += scale * (b / (nu * nv) - cos * a / nu2);
    }
}

/// Products of all elements except index `i`, without division.
fn leave_one_out_products(xs: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.resize(xs.len(), 1.0);
    let mut acc = 1.0;
    for i in 0..xs.len() {
        out[i] = acc;
        acc *= xs[i];
    }
    acc = 1.0;
    for i in (0..xs.len()).rev() {
        out[i] *= acc;
        acc *= xs[i];
    }
}

/// Basic and occurrence embeddings of the valid features.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    /// `basic[i][j] = 1` iff head variable `j` occurs in feature `i`.
    pub basic: Vec<Vec<f64>>,
    /// `occurrence[i][s] = 1` iff existential variable `s` occurs in feature `i`.
    pub occurrence: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    pub fn head_arity(&self) -> usize {
        self.basic.first().map_or(0, Vec::len)
    }

    pub fn existential_count(&self) -> usize {
        self.occurrence.first().map_or(0, Vec::len)
    }
}

pub fn feature_embeddings(features: &FeatureSpace) -> EmbeddingTable {
    let head = features.head_variables();
    let exist = features.existential_variables();
    let membership = |vars: &[String], atom: &crate::logic::Atom| -> Vec<f64> {
        vars.iter()
            .map(|v| if atom.mentions_var(v) { 1.0 } else { 0.0 })
            .collect()
    };
    EmbeddingTable {
        basic: features.valid_features.iter().map(|a| membership(head, a)).collect(),
        occurrence: features.valid_features.iter().map(|a| membership(exist, a)).collect(),
    }
}

/// Frozen rows of rules already extracted as sound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorMatrix {
    pub rows: Matrix,
}

impl PriorMatrix {
    pub fn empty(width: usize) -> Self {
        PriorMatrix {
            rows: Matrix::zeros(0, width),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.rows == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleTensors {
    pub m1: usize,
    pub m2: usize,
    pub n_a: usize,
    pub width: usize,
    /// `m1 x C`.
    pub logits_s: Vec<f64>,
    /// `m2 x n_a x C`, slice-major within each row.
    pub logits_a: Vec<f64>,
}

impl RuleTensors {
    /// Logits drawn from `N(0, 0.1^2)`.
    pub fn init(m1: usize, m2: usize, n_a: usize, width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.1).expect("valid normal");
        let logits_s = (0..m1 * width).map(|_| normal.sample(&mut rng)).collect();
        let logits_a = (0..m2 * n_a * width).map(|_| normal.sample(&mut rng)).collect();
        RuleTensors {
            m1,
            m2,
            n_a,
            width,
            logits_s,
            logits_a,
        }
    }

    pub fn from_hyper(hp: &HyperParams, width: usize) -> Self {
        Self::init(hp.m1, hp.m2, hp.n_a, width, hp.seed)
    }

    pub fn rows(&self) -> usize {
        self.m1 + self.m2
    }

    pub fn matrix_s(&self) -> Matrix {
        Matrix {
            rows: self.m1,
            cols: self.width,
            data: self.logits_s.iter().map(|&x| logistic(x)).collect(),
        }
    }

    /// `A` flattened to `(m2 * n_a) x C`; slice `i` of rule `k` is row `k * n_a + i`.
    pub fn tensor_a(&self) -> Matrix {
        Matrix {
            rows: self.m2 * self.n_a,
            cols: self.width,
            data: self.logits_a.iter().map(|&x| logistic(x)).collect(),
        }
    }

    /// The stacked rule matrix `M_P`.
    pub fn matrix(&self) -> Matrix {
        merge_concat(&self.matrix_s(), &self.tensor_a(), self.n_a)
    }
}

/// Averages each rule's `n_a` slices of `A` and stacks the result under `S`.
pub fn merge_concat(s: &Matrix, a: &Matrix, n_a: usize) -> Matrix {
    let width = if s.rows > 0 { s.cols } else { a.cols };
    let m2 = if n_a == 0 { 0 } else { a.rows / n_a };
    let mut m = Matrix::zeros(s.rows + m2, width);
    m.data[..s.data.len()].copy_from_slice(&s.data);
    for k in 0..m2 {
        let out = m.row_mut(s.rows + k);
        for i in 0..n_a {
            for (o, x) in out.iter_mut().zip(a.row(k * n_a + i)) {
                *o += x;
            }
        }
        for o in out.iter_mut() {
            *o /= n_a as f64;
        }
    }
    m
}

fn sparse_dot(row: &[f64], v: &[(u32, f64)]) -> f64 {
    v.iter().map(|&(j, w)| row[j as usize] * w).sum()
}

/// Differentiable consequence of `v_i` under `M_P`.
pub fn infer(m: &Matrix, v_i: &[f64], gamma: f64) -> Result<f64, EngineError> {
    if v_i.len() != m.cols {
        return Err(EngineError::DimensionMismatch {
            what: "input vector",
            expected: m.cols,
            got: v_i.len(),
        });
    }
    let acts: Vec<f64> = (0..m.rows)
        .map(|k| {
            let dot: f64 = m.row(k).iter().zip(v_i).map(|(a, b)| a * b).sum();
            activation(dot - 1.0, gamma)
        })
        .collect();
    Ok(fuzzy_or(&acts))
}

/// `basic_k` for every row.
pub fn basic_scores(m: &Matrix, emb: &EmbeddingTable) -> Vec<f64> {
    let t = emb.head_arity();
    (0..m.rows)
        .map(|k| {
            let row = m.row(k);
            (0..t)
                .map(|j| {
                    let col: Vec<f64> = row.iter().zip(&emb.basic).map(|(w, b)| w * b[j]).collect();
                    fuzzy_or(&col)
                })
                .product()
        })
        .collect()
}

/// `V_o^k` for every row: summed occurrence weight of each existential variable.
pub fn occurrence_totals(m: &Matrix, emb: &EmbeddingTable) -> Vec<Vec<f64>> {
    let s = emb.existential_count();
    (0..m.rows)
        .map(|k| {
            let row = m.row(k);
            (0..s)
                .map(|slot| row.iter().zip(&emb.occurrence).map(|(w, o)| w * o[slot]).sum())
                .collect()
        })
        .collect()
}

/// The six loss components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossVector(pub [f64; 6]);

impl LossVector {
    pub fn inference(&self) -> f64 {
        self.0[0]
    }
}

pub fn total_loss(l: &LossVector, theta: &[f64; 6]) -> f64 {
    l.0.iter().zip(theta).map(|(a, b)| a * b).sum()
}

/// Per-component gradients with respect to `M_P` (and `A` for `L_F`).
struct ComponentGrads {
    dm: Vec<Matrix>,
    da: Matrix,
}

/// Losses of a rule matrix `m` (with `a` the unmerged slices of its last
/// `a.rows / n_a` rows). When `grads` is given, per-component gradients are
/// accumulated into it.
fn losses(
    m: &Matrix,
    a: &Matrix,
    n_a: usize,
    batch: &[TrainingPair],
    emb: &EmbeddingTable,
    prior: &PriorMatrix,
    hp: &HyperParams,
    mut grads: Option<&mut ComponentGrads>,
) -> Result<LossVector, EngineError> {
    if batch.is_empty() {
        return Err(EngineError::EmptyBatch);
    }
    if emb.basic.len() != m.cols {
        return Err(EngineError::DimensionMismatch {
            what: "embedding table",
            expected: m.cols,
            got: emb.basic.len(),
        });
    }
    if !prior.is_empty() && prior.rows.cols != m.cols {
        return Err(EngineError::DimensionMismatch {
            what: "prior matrix",
            expected: m.cols,
            got: prior.rows.cols,
        });
    }
    let rows = m.rows;
    let mut out = [0.0; 6];
    let mut scratch = Vec::new();

    // inference
    let total_weight: f64 = if hp.weight_by_count {
        batch.iter().map(|p| p.count as f64).sum()
    } else {
        batch.len() as f64
    };
    let mut acts = vec![0.0; rows];
    let mut one_minus = vec![0.0; rows];
    for pair in batch {
        if let Some(&(j, _)) = pair.inputs.last() {
            if j as usize >= m.cols {
                return Err(EngineError::DimensionMismatch {
                    what: "training pair",
                    expected: m.cols,
                    got: j as usize + 1,
                });
            }
        }
        let weight = if hp.weight_by_count { pair.count as f64 } else { 1.0 } / total_weight;
        for k in 0..rows {
            acts[k] = activation(sparse_dot(m.row(k), &pair.inputs) - 1.0, hp.gamma);
            one_minus[k] = 1.0 - acts[k];
        }
        let pred = 1.0 - one_minus.iter().product::<f64>();
        let p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS);
        let y = pair.v_o;
        out[0] -= weight * (y * p.ln() + (1.0 - y) * (1.0 - p).ln());
        if let Some(g) = grads.as_deref_mut() {
            if pred > BCE_EPS && pred < 1.0 - BCE_EPS {
                let d_pred = weight * (-y / p + (1.0 - y) / (1.0 - p));
                leave_one_out_products(&one_minus, &mut scratch);
                for k in 0..rows {
                    let d_act = d_pred * scratch[k];
                    let d_dot = d_act * hp.gamma * acts[k] * (1.0 - acts[k]);
                    let row = g.dm[0].row_mut(k);
                    for &(j, w) in &pair.inputs {
                        row[j as usize] += d_dot * w;
                    }
                }
            }
        }
    }

    // row sums
    for k in 0..rows {
        let diff = m.row(k).iter().sum::<f64>() - 1.0;
        out[1] += diff * diff;
        if let Some(g) = grads.as_deref_mut() {
            for x in g.dm[1].row_mut(k) {
                *x += 2.0 * diff;
            }
        }
    }

    // basic coverage of head variables
    let t = emb.head_arity();
    let mut factors = vec![0.0; m.cols];
    let mut col_scores = vec![0.0; t];
    let mut col_loo = Vec::new();
    for k in 0..rows {
        let row = m.row(k);
        let mut col_factors: Vec<Vec<f64>> = Vec::with_capacity(t);
        for j in 0..t {
            for (i, f) in factors.iter_mut().enumerate() {
                *f = 1.0 - row[i] * emb.basic[i][j];
            }
            col_scores[j] = 1.0 - factors.iter().product::<f64>();
            col_factors.push(factors.clone());
        }
        let basic: f64 = col_scores.iter().product();
        out[2] += (basic - 1.0).powi(2);
        if let Some(g) = grads.as_deref_mut() {
            let d_basic = 2.0 * (basic - 1.0);
            leave_one_out_products(&col_scores, &mut col_loo);
            let grow = g.dm[2].row_mut(k);
            for j in 0..t {
                leave_one_out_products(&col_factors[j], &mut scratch);
                let d_col = d_basic * col_loo[j];
                for i in 0..m.cols {
                    grow[i] += d_col * emb.basic[i][j] * scratch[i];
                }
            }
        }
    }

    // occurrence of existential variables
    let totals = occurrence_totals(m, emb);
    for (k, slots) in totals.iter().enumerate() {
        for (s, &x) in slots.iter().enumerate() {
            let f = occurrence_measure(x, hp);
            out[3] += f;
            if let Some(g) = grads.as_deref_mut() {
                let d = f * (-2.0 * hp.occ_c * (x - hp.occ_d));
                let grow = g.dm[3].row_mut(k);
                for i in 0..m.cols {
                    grow[i] += d * emb.occurrence[i][s];
                }
            }
        }
    }

    // diversity between the slices of each A rule
    if n_a >= 2 {
        let m2 = a.rows / n_a;
        for k in 0..m2 {
            for i1 in 0..n_a {
                for i2 in (i1 + 1)..n_a {
                    let (r1, r2) = (k * n_a + i1, k * n_a + i2);
                    let c = cosine(a.row(r1), a.row(r2));
                    out[4] += (c + 1.0).powi(2);
                    if let Some(g) = grads.as_deref_mut() {
                        let scale = 2.0 * (c + 1.0);
                        cosine_grad_u(a.row(r1), a.row(r2), scale, g.da.row_mut(r1));
                        cosine_grad_u(a.row(r2), a.row(r1), scale, g.da.row_mut(r2));
                    }
                }
            }
        }
    }

    // dissimilarity from prior rows
    for k in 0..rows {
        for p in 0..prior.len() {
            let c = cosine(m.row(k), prior.rows.row(p));
            out[5] += (c + 1.0).powi(2);
            if let Some(g) = grads.as_deref_mut() {
                cosine_grad_u(m.row(k), prior.rows.row(p), 2.0 * (c + 1.0), g.dm[5].row_mut(k));
            }
        }
    }

    for (name, v) in LOSS_NAMES.iter().zip(out) {
        if !v.is_finite() {
            return Err(EngineError::NonFiniteLoss { component: name, value: v });
        }
    }
    Ok(LossVector(out))
}

/// Loss components for an explicit rule matrix and slice tensor.
pub fn loss_vector_for_matrices(
    m: &Matrix,
    a: &Matrix,
    n_a: usize,
    batch: &[TrainingPair],
    emb: &EmbeddingTable,
    prior: &PriorMatrix,
    hp: &HyperParams,
) -> Result<LossVector, EngineError> {
    losses(m, a, n_a, batch, emb, prior, hp, None)
}

pub fn loss_vector(
    tensors: &RuleTensors,
    batch: &[TrainingPair],
    emb: &EmbeddingTable,
    prior: &PriorMatrix,
    hp: &HyperParams,
) -> Result<LossVector, EngineError> {
    let a = tensors.tensor_a();
    let m = merge_concat(&tensors.matrix_s(), &a, tensors.n_a);
    losses(&m, &a, tensors.n_a, batch, emb, prior, hp, None)
}

/// Gradient of `theta . L` with respect to both logit tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub logits_s: Vec<f64>,
    pub logits_a: Vec<f64>,
}

pub fn loss_and_gradient(
    tensors: &RuleTensors,
    batch: &[TrainingPair],
    emb: &EmbeddingTable,
    prior: &PriorMatrix,
    hp: &HyperParams,
) -> Result<(LossVector, Gradient), EngineError> {
    let s = tensors.matrix_s();
    let a = tensors.tensor_a();
    let m = merge_concat(&s, &a, tensors.n_a);
    let mut g = ComponentGrads {
        dm: (0..6).map(|_| Matrix::zeros(m.rows, m.cols)).collect(),
        da: Matrix::zeros(a.rows, a.cols),
    };
    let l = losses(&m, &a, tensors.n_a, batch, emb, prior, hp, Some(&mut g))?;
    for (c, name) in LOSS_NAMES.iter().enumerate() {
        let finite = if c == 4 { g.da.is_finite() } else { g.dm[c].is_finite() };
        if !finite {
            return Err(EngineError::NonFiniteGradient { component: name });
        }
    }

    let mut dm = Matrix::zeros(m.rows, m.cols);
    for (c, comp) in g.dm.iter().enumerate() {
        let w = hp.theta[c];
        if w != 0.0 {
            for (d, x) in dm.data.iter_mut().zip(&comp.data) {
                *d += w * x;
            }
        }
    }
    let mut da = g.da;
    for x in da.data.iter_mut() {
        *x *= hp.theta[4];
    }
    // merged rows spread evenly over their slices
    let n_a = tensors.n_a;
    for k in 0..tensors.m2 {
        let src = dm.row(tensors.m1 + k).to_vec();
        for i in 0..n_a {
            for (d, x) in da.row_mut(k * n_a + i).iter_mut().zip(&src) {
                *d += x / n_a as f64;
            }
        }
    }
    let logits_s = s.data[..]
        .iter()
        .zip(&dm.data[..tensors.m1 * tensors.width])
        .map(|(p, d)| d * p * (1.0 - p))
        .collect();
    let logits_a = a
        .data
        .iter()
        .zip(&da.data)
        .map(|(p, d)| d * p * (1.0 - p))
        .collect();
    Ok((l, Gradient { logits_s, logits_a }))
}

/// First and second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    m_s: Vec<f64>,
    v_s: Vec<f64>,
    m_a: Vec<f64>,
    v_a: Vec<f64>,
}

impl AdamState {
    pub fn new(tensors: &RuleTensors) -> Self {
        AdamState {
            step: 0,
            m_s: vec![0.0; tensors.logits_s.len()],
            v_s: vec![0.0; tensors.logits_s.len()],
            m_a: vec![0.0; tensors.logits_a.len()],
            v_a: vec![0.0; tensors.logits_a.len()],
        }
    }
}

fn adam_update(params: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], step: u64, hp: &HyperParams) {
    let bc1 = 1.0 - hp.beta1.powi(step as i32);
    let bc2 = 1.0 - hp.beta2.powi(step as i32);
    for i in 0..params.len() {
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * grad[i];
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= hp.lr * m_hat / (v_hat.sqrt() + hp.eps_adam);
    }
}

/// One full-batch Adam step on `theta . L`. Returns the losses before the update.
pub fn train_step(
    tensors: &mut RuleTensors,
    batch: &[TrainingPair],
    emb: &EmbeddingTable,
    prior: &PriorMatrix,
    hp: &HyperParams,
    state: &mut AdamState,
) -> Result<LossVector, EngineError> {
    let (l, g) = loss_and_gradient(tensors, batch, emb, prior, hp)?;
    state.step += 1;
    adam_update(&mut tensors.logits_s, &g.logits_s, &mut state.m_s, &mut state.v_s, state.step, hp);
    adam_update(&mut tensors.logits_a, &g.logits_a, &mut state.m_a, &mut state.v_a, state.step, hp);
    Ok(l)
}

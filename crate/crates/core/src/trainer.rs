//! Training loop with curriculum extraction and early stopping.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::{total_loss, train_step, AdamState, EngineError, HyperParams, LossVector, Matrix, PriorMatrix, RuleTensors};
use crate::engine::feature_embeddings;
use crate::extract::{default_filters, extract_candidates, sort_rules, Candidate, ScoredRule};
use crate::ground::Database;
use crate::logic::{closure_in_place, rule_precision_in, LogicProgram, Rule};
use crate::propositional::{FeatureSpace, TrainingPair};
use crate::task::TaskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainStatus {
    /// The sound program derives every training positive from the background.
    Covered,
    /// The epoch budget ran out first.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub losses: LossVector,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub loss_history: Vec<LossRecord>,
    pub sound_rules: Vec<ScoredRule>,
    pub final_tensors: RuleTensors,
    pub prior: PriorMatrix,
    pub epochs_run: usize,
    pub status: TrainStatus,
}

impl TrainReport {
    pub fn program(&self) -> LogicProgram {
        self.sound_rules.iter().map(|r| r.rule.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub hp: HyperParams,
    pub tau_s: f64,
    pub filters: Vec<f64>,
    pub early_stop: bool,
    /// Also keep the minimal sound generalizations of every sound rule.
    pub generalize: bool,
}

impl TrainOptions {
    pub fn new(hp: HyperParams, tau_s: f64) -> Self {
        TrainOptions {
            hp,
            tau_s,
            filters: default_filters(),
            early_stop: true,
            generalize: false,
        }
    }
}

/// Appends rows not already present. Returns how many were added.
pub fn curriculum_update(prior: &mut PriorMatrix, rows: &Matrix) -> Result<usize, EngineError> {
    if rows.rows > 0 && rows.cols != prior.rows.cols {
        return Err(EngineError::DimensionMismatch {
            what: "prior row",
            expected: prior.rows.cols,
            got: rows.cols,
        });
    }
    let mut added = 0;
    for k in 0..rows.rows {
        let row = rows.row(k);
        if !(0..prior.len()).any(|p| prior.rows.row(p) == row) {
            prior.rows.push_row(row);
            added += 1;
        }
    }
    Ok(added)
}

pub fn train(
    spec: &TaskSpec,
    pairs: &[TrainingPair],
    features: &FeatureSpace,
    hp: &HyperParams,
    tau_s: f64,
) -> Result<TrainReport, EngineError> {
    train_with(spec, pairs, features, &TrainOptions::new(hp.clone(), tau_s))
}

/// Scores candidate rules against the observed facts, remembering results.
struct Scorer {
    db: Database,
    cache: HashMap<Rule, (f64, u64, u64)>,
}

impl Scorer {
    fn score(&mut self, rule: &Rule) -> (f64, u64, u64) {
        if let Some(s) = self.cache.get(rule) {
            return *s;
        }
        let s = rule_precision_in(rule, &self.db);
        self.cache.insert(rule.clone(), s);
        s
    }

    fn is_sound(&mut self, rule: &Rule, tau_s: f64) -> bool {
        let (precision, _, n_b) = self.score(rule);
        n_b > 0 && precision >= tau_s
    }

    /// Minimal sound sub-bodies of a sound rule, shortest first. Bodies longer
    /// than `MAX_GENERALIZED_BODY` are left as they are.
    fn generalize(&mut self, rule: &Rule, tau_s: f64) -> Vec<Rule> {
        let n = rule.body().len();
        if n > MAX_GENERALIZED_BODY {
            return Vec::new();
        }
        let mut masks: Vec<u32> = (1..(1u32 << n) - 1).collect();
        masks.sort_by_key(|m| (m.count_ones(), *m));
        let mut kept: Vec<u32> = Vec::new();
        let mut out = Vec::new();
        for mask in masks {
            if kept.iter().any(|k| k & mask == *k) {
                continue;
            }
            let body = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| rule.body()[i].clone());
            let shorter = Rule::new(rule.head().clone(), body);
            if !shorter.is_tautology() && self.is_sound(&shorter, tau_s) {
                kept.push(mask);
                out.push(shorter);
            }
        }
        out
    }
}

const MAX_GENERALIZED_BODY: usize = 10;

struct Curriculum<'a> {
    features: &'a FeatureSpace,
    filters: &'a [f64],
    tau_s: f64,
    generalize: bool,
    scorer: Scorer,
    known: BTreeSet<Rule>,
    sound: Vec<ScoredRule>,
    prior: PriorMatrix,
}

impl Curriculum<'_> {
    /// Extracts from the current matrix; true when new sound rules appeared.
    fn extract(&mut self, m: &Matrix) -> Result<bool, EngineError> {
        if log::log_enabled!(log::Level::Trace) {
            for k in 0..m.rows {
                let row: Vec<String> = m.row(k).iter().map(|x| format!("{x:.2}")).collect();
                log::trace!("row {k}: [{}]", row.join(" "));
            }
        }
        let candidates: Vec<Candidate> = extract_candidates(m, self.features, self.filters);
        let mut rows = Matrix::zeros(0, m.cols);
        let mut fresh = false;
        for c in candidates {
            if self.known.contains(&c.rule) || !self.scorer.is_sound(&c.rule, self.tau_s) {
                continue;
            }
            let mut rules = vec![c.rule.clone()];
            if self.generalize {
                rules.extend(self.scorer.generalize(&c.rule, self.tau_s));
            }
            let mut added = false;
            for rule in rules {
                if !self.known.insert(rule.clone()) {
                    continue;
                }
                let (precision, n_r, n_b) = self.scorer.score(&rule);
                log::debug!("sound rule {rule} ({n_r}/{n_b}) from row {} at {:.2}", c.source_row, c.tau_f);
                self.sound.push(ScoredRule {
                    rule,
                    precision,
                    n_r,
                    n_b,
                    source_row: c.source_row,
                    tau_f: c.tau_f,
                });
                added = true;
            }
            if added {
                rows.push_row(m.row(c.source_row));
                fresh = true;
            }
        }
        curriculum_update(&mut self.prior, &rows)?;
        Ok(fresh)
    }
}

/// True when the rules derive every positive starting from the background.
pub(crate) fn covers_positives(spec: &TaskSpec, rules: &[ScoredRule]) -> bool {
    if rules.is_empty() {
        return spec.positives.is_empty();
    }
    let program: LogicProgram = rules.iter().map(|r| r.rule.clone()).collect();
    let mut db = Database::from_factset(&spec.background);
    closure_in_place(&program, &mut db);
    spec.positives.true_atoms().iter().all(|a| db.contains_atom(a))
}

/// Seed of the initialization used by restart `round`.
fn round_seed(seed: u64, round: usize) -> u64 {
    seed.wrapping_add((round as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub fn train_with(
    spec: &TaskSpec,
    pairs: &[TrainingPair],
    features: &FeatureSpace,
    opts: &TrainOptions,
) -> Result<TrainReport, EngineError> {
    let hp = &opts.hp;
    if pairs.is_empty() {
        return Err(EngineError::EmptyBatch);
    }
    let width = features.width();
    let emb = feature_embeddings(features);
    let mut curriculum = Curriculum {
        features,
        filters: &opts.filters,
        tau_s: opts.tau_s,
        generalize: opts.generalize,
        scorer: Scorer {
            db: Database::from_factset(&spec.observed_facts()),
            cache: HashMap::new(),
        },
        known: BTreeSet::new(),
        sound: Vec::new(),
        prior: PriorMatrix::empty(width),
    };
    let mut history = Vec::with_capacity(hp.epochs);
    let mut status = TrainStatus::BudgetExhausted;
    let mut tensors = RuleTensors::from_hyper(hp, width);

    'rounds: for round in 0..=hp.restarts {
        if round > 0 {
            if hp.epochs == 0 || (opts.early_stop && covers_positives(spec, &curriculum.sound)) {
                break;
            }
            log::info!("restart {round}");
            tensors = RuleTensors::init(hp.m1, hp.m2, hp.n_a, width, round_seed(hp.seed, round));
        }
        let mut adam = AdamState::new(&tensors);
        for epoch in 0..hp.epochs {
            let losses = train_step(&mut tensors, pairs, &emb, &curriculum.prior, hp, &mut adam)?;
            history.push(LossRecord {
                epoch: history.len(),
                losses,
                total: total_loss(&losses, &hp.theta),
            });
            let last = epoch + 1 == hp.epochs;
            let due = hp.curriculum_every > 0 && (epoch + 1) % hp.curriculum_every == 0;
            if due || last {
                let fresh = curriculum.extract(&tensors.matrix())?;
                log::info!(
                    "epoch {}: loss {:.5}, {} sound rules",
                    history.len(),
                    history.last().map_or(0.0, |r| r.total),
                    curriculum.sound.len()
                );
                if opts.early_stop && fresh && covers_positives(spec, &curriculum.sound) {
                    status = TrainStatus::Covered;
                    break 'rounds;
                }
            }
        }
    }
    if status == TrainStatus::BudgetExhausted && covers_positives(spec, &curriculum.sound) {
        status = TrainStatus::Covered;
    }
    let mut sound = curriculum.sound;
    sort_rules(&mut sound);
    Ok(TrainReport {
        epochs_run: history.len(),
        loss_history: history,
        sound_rules: sound,
        final_tensors: tensors,
        prior: curriculum.prior,
        status,
    })
}

pub const LOSS_CSV_HEADER: &str = "epoch,L_I,L_S,L_B,L_O,L_F,L_C,total";

pub fn loss_csv(history: &[LossRecord]) -> String {
    let mut out = String::from(LOSS_CSV_HEADER);
    out.push('\n');
    for r in history {
        let _ = write!(out, "{}", r.epoch);
        for v in r.losses.0 {
            let _ = write!(out, ",{v:e}");
        }
        let _ = writeln!(out, ",{:e}", r.total);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propositional::tests::predecessor_example;
    use crate::propositional::{features_for, propositionalize, PropositionalizeOptions};

    #[test]
    fn zero_epochs() {
        let spec = predecessor_example();
        let fs = features_for(&spec);
        let p = propositionalize(&spec, &fs, PropositionalizeOptions::default()).unwrap();
        let hp = HyperParams {
            epochs: 0,
            ..Default::default()
        };
        let r = train(&spec, &p.pairs, &p.features, &hp, 1.0).unwrap();
        assert!(r.loss_history.is_empty());
        assert_eq!(r.epochs_run, 0);
        assert_eq!(r.final_tensors, RuleTensors::from_hyper(&hp, p.features.width()));
    }

    #[test]
    fn prior_rows_are_deduplicated() {
        let mut prior = PriorMatrix::empty(3);
        let rows = Matrix::from_rows(&[vec![0.1, 0.8, 0.1]]);
        assert_eq!(curriculum_update(&mut prior, &rows).unwrap(), 1);
        assert_eq!(curriculum_update(&mut prior, &rows).unwrap(), 0);
        assert_eq!(prior.len(), 1);
        let other = Matrix::from_rows(&[vec![0.7, 0.2, 0.1]]);
        curriculum_update(&mut prior, &other).unwrap();
        assert_eq!(prior.len(), 2);
        assert!(curriculum_update(&mut prior, &Matrix::from_rows(&[vec![1.0]])).is_err());
    }

    #[test]
    fn loss_csv_layout() {
        let h = vec![LossRecord {
            epoch: 0,
            losses: LossVector([1.0, 0.5, 0.0, 0.0, 0.0, 0.0]),
            total: 1.05,
        }];
        let csv = loss_csv(&h);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(LOSS_CSV_HEADER));
        assert_eq!(lines.next().unwrap().split(',').count(), 8);
    }
}

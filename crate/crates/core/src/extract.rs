//! Reading rules back out of a trained matrix.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::Matrix;
use crate::ground::Database;
use crate::logic::{rule_precision_in, Atom, FactSet, Rule};
use crate::propositional::FeatureSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRule {
    #[serde(with = "rule_text")]
    pub rule: Rule,
    pub precision: f64,
    pub n_r: u64,
    pub n_b: u64,
    pub source_row: usize,
    pub tau_f: f64,
}

mod rule_text {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::logic::Rule;

    pub fn serialize<S: Serializer>(rule: &Rule, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(rule)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rule, D::Error> {
        let text = String::deserialize(d)?;
        let program = crate::io::parse_program(&text).map_err(D::Error::custom)?;
        program
            .rules()
            .first()
            .cloned()
            .ok_or_else(|| D::Error::custom("empty rule"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub rule: Rule,
    pub source_row: usize,
    pub tau_f: f64,
}

/// `{0.05, 0.10, ..., 1.0}`.
pub fn default_filters() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.05).collect()
}

/// One candidate per (row, filter) with a non-empty body; duplicates keep the
/// smallest filter, then the lowest row.
pub fn extract_candidates(m: &Matrix, features: &FeatureSpace, filters: &[f64]) -> Vec<Candidate> {
    assert_eq!(m.cols, features.valid_features.len(), "matrix width must match valid features");
    let head = features.target.clone();
    let mut seen: BTreeMap<Rule, usize> = BTreeMap::new();
    let mut out: Vec<Candidate> = Vec::new();
    for k in 0..m.rows {
        let row = m.row(k);
        for &tau in filters {
            let body: Vec<Atom> = row
                .iter()
                .zip(&features.valid_features)
                .filter(|(w, _)| **w > tau)
                .map(|(_, a)| a.clone())
                .collect();
            if body.is_empty() {
                continue;
            }
            let rule = Rule::new(head.clone(), body);
            if rule.is_tautology() {
                continue;
            }
            match seen.get(&rule) {
                Some(&i) => {
                    if tau < out[i].tau_f {
                        out[i].tau_f = tau;
                        out[i].source_row = k;
                    }
                }
                None => {
                    seen.insert(rule.clone(), out.len());
                    out.push(Candidate {
                        rule,
                        source_row: k,
                        tau_f: tau,
                    });
                }
            }
        }
    }
    out
}

pub fn select_sound(candidates: &[Candidate], facts: &FactSet, tau_s: f64) -> Vec<ScoredRule> {
    let db = Database::from_factset(facts);
    select_sound_in(candidates, &db, tau_s)
}

pub(crate) fn select_sound_in(candidates: &[Candidate], db: &Database, tau_s: f64) -> Vec<ScoredRule> {
    let mut out: Vec<ScoredRule> = candidates
        .iter()
        .filter_map(|c| {
            let (precision, n_r, n_b) = rule_precision_in(&c.rule, db);
            (n_b > 0 && precision >= tau_s).then(|| ScoredRule {
                rule: c.rule.clone(),
                precision,
                n_r,
                n_b,
                source_row: c.source_row,
                tau_f: c.tau_f,
            })
        })
        .collect();
    sort_rules(&mut out);
    out
}

/// Descending precision, then shorter bodies, then rule order.
pub fn sort_rules(rules: &mut [ScoredRule]) {
    rules.sort_by(|a, b| {
        b.precision
            .total_cmp(&a.precision)
            .then(a.rule.body().len().cmp(&b.rule.body().len()))
            .then_with(|| a.rule.cmp(&b.rule))
    });
}

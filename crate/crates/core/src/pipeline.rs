//! End-to-end learning: propositionalize, train, extract.

use serde::Serialize;

use crate::engine::{EngineError, HyperParams};
use crate::eval::{evaluate, AccuracyReport};
use crate::extract::ScoredRule;
use crate::io::serialize_program;
use crate::logic::LogicProgram;
use crate::propositional::{features_for, propositionalize, PropositionalizeError, PropositionalizeOptions};
use crate::task::TaskSpec;
use crate::trainer::{loss_csv, train_with, TrainOptions, TrainReport, TrainStatus};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Propositionalize(#[from] PropositionalizeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid hyperparameters: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub train: TrainOptions,
    pub propositionalize: PropositionalizeOptions,
}

impl LearnConfig {
    pub fn new(hp: HyperParams, tau_s: f64) -> Self {
        LearnConfig {
            train: TrainOptions::new(hp, tau_s),
            propositionalize: PropositionalizeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub task: String,
    pub target: String,
    /// Number of valid features.
    #[serde(rename = "C")]
    pub c: usize,
    /// Size of the candidate feature space before examination.
    pub features_total: usize,
    #[serde(rename = "S_size")]
    pub s_size: u64,
    pub pairs: usize,
    pub epochs_run: usize,
    pub sound_rules: usize,
    pub status: Option<TrainStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub summary: RunSummary,
    /// `None` when propositionalization produced no training pairs.
    pub report: Option<TrainReport>,
    pub rules: Vec<ScoredRule>,
    pub evaluation: Option<AccuracyReport>,
}

impl LearnOutcome {
    pub fn program(&self) -> LogicProgram {
        self.rules.iter().map(|r| r.rule.clone()).collect()
    }

    pub fn program_text(&self) -> String {
        serialize_program(&self.rules)
    }

    pub fn loss_csv(&self) -> String {
        loss_csv(self.report.as_ref().map_or(&[][..], |r| &r.loss_history))
    }
}

pub fn learn(spec: &TaskSpec, config: &LearnConfig) -> Result<LearnOutcome, PipelineError> {
    config.train.hp.validate().map_err(PipelineError::Config)?;
    let features = features_for(spec);
    let total = features.all_features.len();
    let prop = propositionalize(spec, &features, config.propositionalize)?;
    log::info!(
        "{}: {} substitutions, {} pairs, {} of {} features valid",
        spec.name,
        prop.substitutions,
        prop.pairs.len(),
        prop.features.width(),
        total
    );
    let report = if prop.pairs.is_empty() || prop.features.width() == 0 {
        None
    } else {
        Some(train_with(spec, &prop.pairs, &prop.features, &config.train)?)
    };
    let rules = report.as_ref().map_or_else(Vec::new, |r| r.sound_rules.clone());
    let program: LogicProgram = rules.iter().map(|r| r.rule.clone()).collect();
    let evaluation = if spec.test_positives.is_empty() {
        None
    } else {
        evaluate(&program, spec).ok()
    };
    let summary = RunSummary {
        task: spec.name.clone(),
        target: spec.target.to_string(),
        c: prop.features.width(),
        features_total: total,
        s_size: prop.substitutions,
        pairs: prop.pairs.len(),
        epochs_run: report.as_ref().map_or(0, |r| r.epochs_run),
        sound_rules: rules.len(),
        status: report.as_ref().map(|r| r.status),
        accuracy: evaluation.as_ref().map(|e| e.accuracy),
    };
    Ok(LearnOutcome {
        summary,
        report,
        rules,
        evaluation,
    })
}

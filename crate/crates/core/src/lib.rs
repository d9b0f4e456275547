//! Learning first-order logic programs with a differentiable rule matrix.
//!
//! Relational facts are propositionalized against a space of candidate body
//! atoms, a pair of rule matrices is trained so that a fuzzy consequence
//! operator reproduces the target facts, and sound rules are read back out
//! by thresholding the matrices and checking precision on the data.

pub mod catalog;
pub mod engine;
pub mod eval;
pub mod extract;
mod ground;
pub mod io;
pub mod kb;
pub mod logic;
pub mod pipeline;
pub mod propositional;
pub mod task;
pub mod trainer;

pub use engine::{HyperParams, Matrix, RuleTensors};
pub use extract::ScoredRule;
pub use logic::{Atom, FactSet, LogicProgram, Predicate, Rule, Term};
pub use task::TaskSpec;

//! Optimal transmission rates for data exchange with helpers.
//!
//! A set of terminals observe correlated parts of a file; some of them
//! (users) want the whole file, the rest (helpers) only assist. This crate
//! finds rate allocations minimizing a weighted sum of broadcast rates,
//! certifies them with a duality gap and an exact cut-set LP, and builds
//! linear codes that achieve them for linear sources.

pub mod dual;
pub mod error;
pub mod field;
pub mod fixtures;
pub mod generate;
pub mod greedy;
pub mod instance;
pub mod lp;
pub mod matrix;
pub mod netcode;
pub mod oracle;
pub mod rational;
pub mod set;
pub mod source;

pub use dual::{solve, DualMatrix, RateMatrix, Solution, SolverConfig, StepSchedule};
pub use error::{DexError, Result};
pub use field::{make_field, Elem, FieldSpec};
pub use greedy::{edmonds_allocate, feasible_in_region, RateVector, TieBreak};
pub use instance::Instance;
pub use matrix::FieldMatrix;
pub use oracle::{build_lp, oracle, solve_exact, CutSetLP, OracleSolution};
pub use rational::Rational;
pub use set::TerminalSet;
pub use source::{EntropyTable, LinearSource, SourceModel};

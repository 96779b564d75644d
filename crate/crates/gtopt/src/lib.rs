//! Rule-based graph optimization: match graph-transformation rules against a
//! typed attributed model, compile the candidate matches into a 0/1 integer
//! linear program, solve it exactly, and apply the selected rule applications.
//!
//! The crate is organized along the pipeline:
//!
//! - [`model`] — typed attributed graphs with a mutation journal
//! - [`pattern`] — graph patterns and (incremental) match maintenance
//! - [`rule`] — transformation rules: LHS pattern plus an action list
//! - [`expr`] — the small arithmetic/comparison expression language shared by
//!   rule actions, pattern conditions, and constraint coefficients
//! - [`ilp`] — bivalent (0/1) linear programs: simplex relaxation,
//!   branch-and-bound, and an LP-format writer
//! - [`dsl`] — parser and type checker for `.gspec` specification files
//! - [`pipeline`] — match-to-variable mapping, ILP construction, and the
//!   match/build/solve/apply cycle
//! - [`overlay`] — the peer-to-peer file-distribution example: a MAPE-K loop
//!   that maintains a depth-2 distribution tree

pub mod dsl;
pub mod expr;
pub mod ilp;
pub mod model;
pub mod overlay;
pub mod pattern;
pub mod pipeline;
pub mod rule;

pub use model::{AttrKind, AttrValue, Metamodel, Model};
pub use pattern::{Match, MatchDelta, MatcherState, Pattern};
pub use pipeline::{CycleReport, Engine};
pub use rule::GtRule;

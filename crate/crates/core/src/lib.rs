//! Meta-interpretive learning of higher-order dyadic logic programs.
//!
//! The search proves the positive examples with a meta-interpreter that
//! invents clauses from metarule templates. Three pruning modes share one
//! engine: untyped, polymorphic types checked by unification, and refinement
//! types checked by an external SMT solver.

pub mod bench;
pub mod engine;
pub mod error;
pub mod kb;
pub mod refine;
pub mod smt;
pub mod term;
pub mod types;

pub use engine::{entails, learn, learn_exhaustive, learn_in, query_first, LearnOutcome, LearnResult, LearnedProgram};
pub use error::{Error, Result};
pub use kb::{parse_atom, parse_problem, Mode, Problem};

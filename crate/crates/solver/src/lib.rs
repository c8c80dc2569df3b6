//! Small dense barrier solver for the convex subproblems of the resource
//! allocation loop.
//!
//! Programs are declared with [`ConvexProgram`] from the atoms in [`expr`];
//! convexity follows from the composition rules and is checked before
//! solving. [`solve`] runs a phase-I pass when the start point violates a
//! row, then follows the central path until the duality gap and the
//! [`kkt_residual`] both drop below the tolerance.

pub mod barrier;
pub mod expr;
pub mod kkt;
pub mod program;
pub mod textbook;

pub use barrier::{solve, InfeasibilityCertificate, SolveStatus, SolverOptions, SolverResult};
pub use expr::{Arg, Atom, Expr, Term};
pub use kkt::{kkt_residual, nnls};
pub use program::{Constraint, ConvexProgram, Variable};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SolverError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("row `{row}` breaks the convexity rules at term {term}")]
    NonConvex { row: String, term: usize },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("start point has {got} entries, program has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("start point lies outside the domain of `{0}`")]
    StartOutsideDomain(String),
}

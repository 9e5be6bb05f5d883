//! Geometric programming.
//!
//! A [`GpProblem`] maximizes a product of powers of positive variables
//! subject to constraints `prod_j posy_j(x) <= mono(x)`. Constraints whose
//! left side is a product of posynomials are kept factored; expanding them
//! gives an ordinary posynomial, and [`Constraint::expanded`] does exactly
//! that. Under `y = ln x` every constraint becomes a sum of log-sum-exp
//! functions plus an affine term, and the objective becomes linear.

mod expr;
mod oracle;
mod solver;
mod text;
mod transform;

pub use expr::{Constraint, GpProblem, GpSolution, GpStatus, Monomial, Posynomial, VarId};
pub use oracle::{grid_oracle, GridPoint};
pub use solver::{solve, SolverOptions};
pub use text::parse_problem;
pub use transform::{log_transform, ConvexConstraint, ConvexProgram, LseFactor};

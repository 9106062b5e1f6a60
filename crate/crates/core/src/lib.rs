//! Operator-splitting solver for one-dimensional semilinear parabolic PDEs
//!
//! ```text
//! -u_t - ½σ²u_xx - b u_x + H(t, x, u_x) = 0,   u(T, ·) = U
//! ```
//!
//! with `H` convex and coercive in `p`. Each backward step combines a
//! Hopf-Lax minimization over the Legendre dual of `H` with a Gaussian
//! expectation of the frozen-coefficient diffusion step.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backward_op;
pub mod baselines;
pub mod config;
pub mod error;
pub mod expectation;
pub mod expr;
pub mod grid;
pub mod harness;
pub mod optimize;
pub mod problem;
pub mod scheme;
pub mod selftest;

pub use backward_op::{BackwardOperator, MinimizeResult, OperatorConfig};
pub use baselines::{cole_hopf_exact, howard_fd_solve, normal_cdf, ColeHopfParams, HowardConfig};
pub use error::{Error, Result};
pub use expectation::ExpectationMethod;
pub use grid::{Grid, GridFunction};
pub use problem::{HamiltonianSpec, ProblemSpec};
pub use scheme::{solve, SchemeSolution};

//! Numerical laboratory for local existence of `u_t - Δu = f(u)` with
//! non-negative Lebesgue initial data.
//!
//! * [`nonlinearity`]: parse and audit `f`, build the ratio envelope.
//! * [`criteria`]: classify `f` for `L^q`, `L^1` and whole-space data.
//! * [`heatkernel`]: Gaussian kernel, heat flow of ball indicators and the
//!   certified lower-bound constants.
//! * [`solver`]: radial Dirichlet heat semigroup and Duhamel machinery.
//! * [`databuilder`]: truncated blow-up initial data.

pub mod cli;
pub mod criteria;
pub mod databuilder;
pub mod error;
pub mod heatkernel;
pub mod nonlinearity;
pub mod par;
pub mod quadrature;
pub mod report;
pub mod solver;

pub use error::{Error, Result};

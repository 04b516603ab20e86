//! Stochastic optimization with coefficient-of-variation diagnostics.
//!
//! The crate is organised around a small set of pieces:
//!
//! - [`problems`]: the stochastic objective abstraction and three concrete
//!   problems (a scalar Rademacher quadratic with a closed-form oracle, a
//!   diagonal least-squares problem, and a linear-softmax classifier on
//!   Gaussian blobs).
//! - [`optimizers`]: Robbins–Monro SGD, heavy-ball momentum, the scalar
//!   secant method and a secant-then-SGD hybrid.
//! - [`diagnostics`]: minibatch CV estimation and momentum roll-off policies.
//! - [`harness`]: config-driven seeded experiments, grids, trace CSVs and SVG
//!   plots.
//! - [`verification`]: Monte Carlo oracles for the analytic claims about the
//!   Rademacher problem and minibatch scaling.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod verification;

pub use error::{Error, Result};
pub use problems::{Minibatch, ParamVector, ProblemOracle, StochasticProblem};

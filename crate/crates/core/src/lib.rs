//! Numerical toolkit for a degenerate variable-exponent eigenvalue problem with
//! singular weights: variable-exponent Lebesgue spaces on tensor grids, the weighted
//! energy and its gradient, mountain-pass certificates, a constrained descent solver and
//! empirical constants for weighted interpolation inequalities.

pub mod ckn;
pub mod cli;
pub mod config;
pub mod eigen;
pub mod energy;
pub mod error;
pub mod expr;
pub mod grid;
pub mod run;
pub mod sampling;
pub mod selftest;
pub mod spaces;
pub mod weights;

pub use error::{Error, Result};

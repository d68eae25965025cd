//! Exact rational scalars and small dense matrices.

mod matrix;
mod rational;

pub use matrix::{inverse, mat_mul_t, solve, LinalgError, RMatrix};
pub use rational::{q, ParseRationalError, Rational};

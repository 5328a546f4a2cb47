//! Ground states, linearized operators, perturbative solitary waves and time
//! evolution for the Gross–Pitaevskii equation with pumping σ(x) and
//! nonlinear damping α|ψ|² in the harmonic trap V(x) = |x|² on ℝ².
//!
//! Everything stationary or dynamic is computed on one periodic grid with a
//! spectral Laplacian; the tensor-Hermite basis supplies dense operator
//! matrices and starting vectors for eigensolves.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contraction;
pub mod discretization;
pub mod error;
pub mod evolve;
pub mod expansion;
#[cfg(test)]
mod fixture;
pub mod groundstate;
pub mod linearized;
pub mod pumpbalance;
pub mod snapshot;

pub use error::{Error, Result};

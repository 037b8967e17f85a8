//! Numerical laboratory for `GL(2, ℝ)` linear cocycles over hyperbolic base
//! dynamics: Lyapunov exponents, Oseledets splittings, fiber-bunching
//! diagnostics, projective invariant measures and continuity-in-measure
//! experiments for Oseledets subspaces.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod base;
pub mod cli;
pub mod cocycle;
pub mod config;
pub mod continuity;
pub mod error;
pub mod expr;
pub mod matrix;
pub mod oseledets;
pub mod plot;
pub mod projective;
pub mod spectrum;

pub use error::{LabError, Result};

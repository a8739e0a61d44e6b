//! A sample-complexity laboratory for stochastic (mixed-integer) optimization.
//!
//! * [`lattice`]: integer points in ℓ2/ℓ∞ balls, counting, packings, rounding.
//! * [`info`]: KL/Fano/two-point calculators and closed-form sample-complexity bounds.
//! * [`families`]: the hard-instance loss families with exact population objectives.
//! * [`solvers`]: exact ERM over integer and continuous sets, decoders, projected SGD.
//! * [`experiments`]: seeded Monte Carlo harness and rate fitting.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod families;
pub mod info;
pub mod lattice;
pub mod solvers;

pub use error::{Error, Result};

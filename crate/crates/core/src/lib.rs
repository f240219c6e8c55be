// NaN must fail validation, so negated comparisons are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Truncated Fourier–Taylor Hamiltonians near invariant tori of lattice
//! beam equations: series algebra, tame norms, small-divisor certification,
//! normal forms and long-time stability experiments.

pub mod dynamics;
pub mod error;
pub mod model;
pub mod normal_form;
pub mod norms;
pub mod resonance;
pub mod series;

pub use error::{Error, Result};

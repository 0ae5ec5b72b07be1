//! Lattice Ginzburg-Landau laboratory: lattice states and norms, model right-hand
//! sides, RK4 integration with blow-up detection, closed-form diagnostics, and the
//! experiment drivers used by the `dgl` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod integrate;
pub mod lattice;
pub mod models;

pub use error::{Error, Result};
pub use num_complex::Complex64;

//! Bayesian optimization over a recursively partitioned domain.
//!
//! The domain is split into a binary tree of subregions. Each leaf carries
//! its own Gaussian-process surrogate fitted to at most `n_node` points, and
//! the next evaluation is chosen by the leaf with the highest penalized
//! expected improvement.

pub mod acquisition;
pub mod drivers;
pub mod error;
pub mod gp;
pub mod harness;
pub mod linalg;
pub mod objective;
pub mod optim;
pub mod partition;
pub mod rng;
pub mod tree;

pub use error::{Error, Result};

/// Round-trip-exact float formatting (17 significant digits, no locale).
pub fn fmt_float(v: f64) -> String {
    format!("{:.16e}", v)
}

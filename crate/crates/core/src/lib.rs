//! Quenched nearest-neighbour random walks in one-dimensional random
//! environments.
//!
//! The crate is split along the lines of the computation:
//!
//! * [`env`] declares environment laws, realizes quenched windows `p_k` and
//!   computes law-level functionals (`lambda`, `r(kappa)`, classification).
//! * [`analytics`] computes the quenched site functionals `mu_k`, `sigma_k^2`,
//!   the centering `H(n)` and the position centerings `b(t)`, `b~(t)`.
//! * [`walk`] simulates the walk: steps, crossing times, hitting times and
//!   position snapshots.
//! * [`oracle`] holds exact finite-interval solvers used to audit the series.
//! * [`harness`] runs the LLN/CLT experiments and environment diagnostics.

pub mod analytics;
pub mod env;
mod error;
pub mod harness;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod walk;

pub use error::{ErrorClass, Result, RwreError};

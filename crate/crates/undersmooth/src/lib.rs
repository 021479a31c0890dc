//! Sparsity-based model selection and selection-mistake-robust inference for
//! scalar functionals of high-dimensional linear models, with a Monte Carlo
//! harness for coverage studies.
//!
//! The central object is a confidence set built from an initially selected
//! model plus two greedy enlargements of it: one driving the lower interval
//! endpoint down, one driving the upper endpoint up. The resulting interval
//! is robust to a user-specified number of selection mistakes.

pub mod dataset;
pub mod error;
pub mod features;
pub mod functionals;
pub mod inference;
pub mod io;
pub mod lasso;
pub mod linalg;
pub mod selection;
pub mod sim;
pub mod stats;
pub mod tu;

pub use dataset::{Dataset, SupportSet};
pub use error::{Error, Result};

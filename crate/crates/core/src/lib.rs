//! Fidelity quantum kernels simulated with matrix product states, kernel
//! SVMs with Bayesian bandwidth search, and kernel diagnostics.
//!
//! The crate is `no_std` and needs only `alloc`. Parallel execution, file
//! formats and the command line live in the `qklab` companion crate.
#![no_std]
// Negated float comparisons reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod circuit;
pub mod dataio;
pub mod diagnostics;
pub mod error;
pub mod hpo;
pub mod kernels;
pub mod linalg;
pub mod mps;
pub mod rng;
pub mod statevector;
pub mod svm;

pub use error::{Error, Result};
pub use num_complex::Complex64;

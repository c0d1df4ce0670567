//! Statevector simulation and bulk-synchronous distributed training for
//! variational quantum algorithms.

pub mod ansatz;
pub mod data;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod gradient;
pub mod linalg;
pub mod pauli;
pub mod rng;
pub mod statevector;

pub use error::{Error, Result};

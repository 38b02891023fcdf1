//! Variable-density compressed sensing with union-of-subspaces priors.
//!
//! Unitary measurement operators, local coherences, optimized
//! with-replacement sampling plans, preconditioned recovery and a seeded
//! experiment harness.

pub mod coherence;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod optim;
pub mod priors;
pub mod recovery;
pub mod rng;
pub mod sampling;
pub mod transforms;

pub use error::{Error, Result};

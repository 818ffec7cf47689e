//! Two-party vertical federated logistic regression laboratory.
//!
//! The active party (Bob) holds labels and part of the features; the passive
//! party (Alice) holds the rest of the features. The crate implements:
//!
//! - the encrypted-residue training protocol over Paillier ciphertexts,
//! - the residue-solving label-inference attack the passive party can mount
//!   from its own message transcript,
//! - three residue protection mechanisms (additive Laplace noise,
//!   multiplicative Laplace noise with dual clipping, and a randomized
//!   response + homomorphic encryption hybrid),
//! - a benchmark harness comparing utility, privacy and wall-clock cost.

pub mod attack;
pub mod bench;
pub mod data;
pub mod error;
pub mod mechanisms;
pub mod message;
pub mod numeric;
pub mod paillier;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod solve;
pub mod wire;

pub use error::{Error, Result};

//! Hybrid quantum-classical generative modelling over PCA features.
//!
//! An ensemble of small variational circuits, simulated exactly on dense
//! statevectors, emits Pauli-X expectation values that are interpreted as
//! (scaled) principal-component scores of an image corpus. A small classical
//! critic is trained against it under a Wasserstein objective with weight
//! clipping; generator gradients come from the parameter-shift rule chained
//! through the critic's input gradient.
//!
//! The crate is `no_std` with `alloc`. Everything that touches the file system
//! lives in the companion `qigl` crate. All transcendental functions go through
//! `libm` so results are bit-identical with and without `std`.
//!
//! Amplitude ordering is little-endian throughout: qubit 0 is the least
//! significant bit of the basis-state index.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod critic;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod imaging;
pub mod linalg;
pub mod qcircuit;
pub mod qgenerator;
pub mod training;

pub use error::{QiglError, Result};
pub use linalg::Matrix;

/// Deterministic random source used everywhere a seed is accepted.
pub type Rng = rand_chacha::ChaCha8Rng;

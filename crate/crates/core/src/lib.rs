//! Decision-tree structure of submodular functions on the Boolean hypercube.
//!
//! The crate builds exact low-rank decision-tree representations of
//! submodular set functions, approximates them by shallow constant-leaf
//! trees, learns them with Fourier-based algorithms, and constructs the
//! symmetric gadgets and embeddings behind the matching lower bounds.
//! Every structural inequality can be checked by exhaustive enumeration
//! for small dimensions.
//!
//! Coordinates are 0-based in the API; textual formats report them 1-based.

pub mod cli;
pub mod cube;
pub mod decompose;
pub mod dtree;
mod error;
pub mod fourier;
pub mod funcs;
pub mod hardness;
pub mod learn;
pub mod rng;

pub use error::{Error, Result};

/// Absolute tolerance for every inequality check against real-valued bounds.
pub const TOL: f64 = 1e-9;

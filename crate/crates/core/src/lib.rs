//! Quantum dynamical semigroups driven by drift fields: discretized
//! generators, Picard construction of the minimal semigroup, and numerical
//! checks of the conditions that make it conservative.

pub mod cli;
pub mod error;
pub mod field;
pub mod grid;
pub mod lindblad;
pub mod linalg;
pub mod mtx;
pub mod semigroup;
pub mod verifier;

pub use error::{Error, Result};

//! Quantum-trajectory simulation of Hong-Ou-Mandel interference between
//! photons emitted by two atoms in bidirectionally coupled cavities.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod operators;
pub mod oracle;
pub mod par;
pub mod stats;
pub mod trajectory;

pub use error::{Error, Result};

//! Arbitrary-gauge light–matter toolkit.
//!
//! Builds naive, correct and frame-transformed Hamiltonians for a flux-driven
//! two-junction circuit and a shuttled dipole in a cavity mode, propagates
//! states under them, and computes gauge-relative emission lineshapes.

pub mod circuit;
pub mod dipole;
pub mod drive;
pub mod error;
pub mod exec;
pub mod gauge;
pub mod lineshape;
pub mod operator;
pub mod propagation;

pub use error::{Error, Result};
pub use exec::Execution;
pub use operator::{Operator, C64};

//! Explicit space-time tent pitching for 1D linear hyperbolic wave systems.

pub mod cli;
pub mod config;
pub mod ctcs_ref;
pub mod error;
pub mod local_solver;
pub mod marcher;
pub mod mesh1d;
pub mod quadrature;
pub mod stability;
pub mod tent_pitcher;
pub mod verify;

pub use error::{Error, Result};

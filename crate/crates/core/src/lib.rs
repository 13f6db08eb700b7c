//! Direct and inverse spectral toolkit for `-d^2/dx^2 + q` on `[0, 1]` with
//! Robin boundary conditions.
//!
//! The crate computes eigenvalues by shooting, evaluates the counting
//! hypotheses that govern partial-data uniqueness, builds the Fourier kernel
//! and integral operator tied to a pair of potentials, and reconstructs a
//! potential on `[0, a]` from its values on `[a, 1]` and a sub-spectrum.

pub mod certificate;
pub mod counting;
pub mod error;
pub mod inverse;
pub mod kernelops;
pub mod potentials;
pub mod sturm;

mod fit;
mod ode;
mod special;

pub use error::{Error, Result};

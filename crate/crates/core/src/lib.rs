//! Correlation energy of a weakly interacting Fermi gas on the torus,
//! computed through collective bosonization of particle-hole pairs.
//!
//! The pipeline: enumerate the Fermi ball and a fattened shell around it
//! ([`lattice`]), tile the unit sphere by equal-area patches separated by
//! corridors ([`patches`]), count particle-hole pairs per patch and momentum
//! ([`paircount`]), assemble and diagonalize the quadratic bosonic blocks
//! ([`quadratic`]) and sum the per-momentum ground state energies
//! ([`energy`]). [`focksandbox`] checks the underlying operator estimates
//! on small fermionic Fock spaces and [`cli`] drives everything from the
//! command line.

#[cfg(feature = "cli")]
pub mod cli;
pub mod energy;
pub mod error;
pub mod focksandbox;
pub mod lattice;
pub mod paircount;
pub mod patches;
pub mod quadratic;
pub mod quadrature;

pub use error::{Error, Result};

//! Fermi–Dirac Boltzmann collision operators on a discrete velocity lattice, the spectral
//! structure of the linearized transport–collision operator, and desk-scale studies of the
//! incompressible Navier–Stokes–Fourier limit.

pub mod collision;
pub mod cli;
pub mod cutoff;
pub mod equilibrium;
pub mod error;
pub mod fluid;
pub mod harness;
pub mod kinetic;
pub mod linalg;
pub mod quadrature;
pub mod spatial;
pub mod spectral;
pub mod symmetry;
pub mod velocity;

pub use error::{Error, Result};
pub use num_complex::Complex64;

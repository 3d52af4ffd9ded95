//! Effective permittivity and frequency-dependent effective permeability of
//! random dielectric rod metamaterials, with a multiple-scattering validator.
//!
//! The crate is organized bottom-up:
//!
//! * [`bessel`] and [`spectrum`]: Bessel functions, the radial Dirichlet
//!   spectrum of the unit disk and the single-rod resonator.
//! * [`law`] and [`microstructure`]: probability laws on rod triples
//!   `(θ, ρ, ε)`, their hypothesis checks, expectations, and sampling of
//!   finite rod assemblies.
//! * [`permeability`]: `μ_eff(k0)` by modal series and closed form, and the
//!   vanishing-absorption limit.
//! * [`cell`]: the effective permittivity tensor from the perforated cell
//!   problem.
//! * [`scattering`]: Foldy–Lax multiple scattering, the homogenized disk and
//!   convergence diagnostics between the two.

pub mod bessel;
pub mod cell;
pub mod error;
pub mod io;
pub mod law;
pub mod microstructure;
pub mod permeability;
pub mod quadrature;
pub mod rng;
pub mod scattering;
pub mod spectrum;

pub use error::{Error, Result};

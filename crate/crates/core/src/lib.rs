//! Simulation and controller-design library for rapid Lyapunov control of
//! finite-dimensional closed quantum systems.
//!
//! The crate provides dense complex matrix arithmetic sized for few-level
//! systems, system definitions with structural condition checks, diagonal
//! Lyapunov observables and their drift terms, six control-law families
//! (standard, bang-bang, two approximate bang-bang forms, and two switching
//! strategies), an exact-unitary fixed-step simulator with zero-crossing
//! event location, LaSalle invariant-set membership tests, and perturbed
//! propagation experiments against the open-loop distance bound.
//!
//! Level indices are zero-based throughout the API; the scenario file format
//! used by the command-line front end is one-based, matching the physics
//! convention.
//!
//! The matrix core in [`matrix`] is generic over the real scalar type; the
//! aliases below fix `f64`, which everything above the matrix layer uses.

pub mod controllers;
pub mod error;
pub mod invariant_set;
pub mod lyapunov;
pub mod matrix;
pub mod model;
pub mod oscillation;
pub mod rng;
pub mod robustness;
pub mod scalar;
pub mod simulator;

pub use error::{Error, Result};
pub use scalar::{NumericPolicy, Scalar};

/// Complex matrix over `f64`, the concrete type used by the physics layer.
pub type CMatrix = matrix::ComplexMatrix<f64>;
/// Density matrix over `f64`.
pub type Density = matrix::DensityMatrix<f64>;
/// Sorted real spectrum over `f64`.
pub type RealSpectrum = matrix::Spectrum<f64>;
/// Complex scalar over `f64`.
pub type C64 = num_complex::Complex<f64>;

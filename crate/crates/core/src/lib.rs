//! Compressible Navier–Stokes flow in a periodic channel whose upper wall is a
//! damped Euler–Bernoulli beam.
//!
//! The moving fluid domain is mapped onto the fixed rectangle
//! `T_L × (0, 1)`; the coupled problem is solved window by window with a
//! Picard iteration over three linear solvers (semi-Lagrangian transport,
//! implicit Lamé step, spectral beam).
//!
//! Every numerical routine is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod beam;
pub mod config;
pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod interp;
pub mod momentum;
pub mod scalar;
pub mod simulation;
pub mod snapshot;
pub mod sources;
pub mod spectral;
pub mod state;
pub mod transport;
pub mod verify;

pub use error::{FsiError, Result};
pub use scalar::Real;

pub type Grid = fields::Grid<f64>;
pub type ScalarField = fields::ScalarField<f64>;
pub type VectorField = fields::VectorField<f64>;
pub type BeamField = fields::BeamField<f64>;
pub type BeamGeometry = geometry::BeamGeometry<f64>;
pub type PhysParams = state::PhysParams<f64>;
pub type CoupledState = state::CoupledState<f64>;

//! Simulation and step-size extrapolation toolkit for Lindblad dynamics.
//!
//! The crate covers two first-order integrators (a Kraus-form step and a
//! dilated-Hamiltonian step), reference propagators, step-size grids with
//! integer quantization, Richardson and least-squares extrapolation to zero
//! step size, shot-noise sampling, and numerical checks of the coefficient
//! bounds that make the extrapolation provably convergent.

pub mod error;
pub mod extrapolation;
pub mod grids;
pub mod integrators;
pub mod model;
pub mod reference;
pub mod sampling;
pub mod theory;
pub mod zoo;

pub use error::{Error, Result};
pub use extrapolation::{ExtrapolationMethod, ExtrapolationResult, ExtrapolationWeights};
pub use grids::StepGrid;
pub use integrators::{IntegratorKind, Trajectory};
pub use model::{ComplexMatrix, DensityMatrix, LindbladModel, Observable, C64};

/// Library version recorded in experiment metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

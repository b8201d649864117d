//! Direct scattering at `k = 1`: a volume Lippmann-Schwinger solver for general
//! compactly supported potentials, a partial-wave solver for radial ones, and
//! the [`FarField`] coefficient object both of them produce.

use thiserror::Error;

pub mod farfield;
pub mod grid;
pub mod potential;
pub mod radial;

pub use farfield::{
    amplitude_eval, far_field_from_radial, field_outside, green_outside, AmplitudeValue, Direction, FarField,
    NoiseRecord, Provenance,
};
pub use grid::{far_field_from_grid, solve_ls_grid, GridField, GridOptions};
pub use potential::{ball_fourier, Potential, PotentialKind, RadialProfile};
pub use radial::{solve_radial, PhaseShifts, RadialOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForwardError {
    #[error("iterative solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("radial integration stalled for l = {ell} at r = {r} (step {step:e}); try a step bound below {suggestion:e} or a smaller potential")]
    Stiff { ell: usize, r: f64, step: f64, suggestion: f64 },
    #[error("operation requires a radial potential")]
    NotRadial,
    #[error("point at radius {r} lies inside the support radius {a}")]
    InsideSupport { r: f64, a: f64 },
    #[error("grid edge count {0} is below the minimum of 8")]
    InvalidGrid(usize),
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, ForwardError>;

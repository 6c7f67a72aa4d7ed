//! Dense linear-algebra kernels.

mod eigen;
mod expm;
pub mod fd;
mod matrix;

pub use eigen::eigenvalues;
pub use expm::{expm, expm_adjoint, expm_frechet};
pub use matrix::SquareMatrix;
pub use num_complex::Complex64;

/// Default numerical tolerances used by checks and diagnostics across the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericsConfig {
    /// Relative tolerance for `expm(A)·expm(−A) = I`.
    pub inverse_tol: f64,
    /// Tolerance for the one-parameter subgroup identity `expm((s+t)A) = expm(sA)·expm(tA)`.
    pub subgroup_tol: f64,
    /// Tolerance for linearity of the Fréchet derivative.
    pub linearity_tol: f64,
    /// Absolute tolerance (per unit norm) for `Σλ = trace`.
    pub trace_tol: f64,
    /// Step for central finite differences.
    pub fd_step: f64,
    /// Relative tolerance when comparing analytic and finite-difference gradients.
    pub fd_tol: f64,
    /// `‖ΨΨᵀ − ΨᵀΨ‖` below which an operator is treated as normal.
    pub normality_tol: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            inverse_tol: 1e-8,
            subgroup_tol: 1e-8,
            linearity_tol: 1e-10,
            trace_tol: 1e-8,
            fd_step: 1e-6,
            fd_tol: 1e-6,
            normality_tol: 1e-10,
        }
    }
}

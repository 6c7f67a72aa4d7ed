//! Lie-group transport operators on low-dimensional data manifolds.
//!
//! The crate learns a dictionary of generator matrices `Ψ_m` from pairs of
//! nearby latent points, infers sparse coefficients that transport one point to
//! another, encodes per-point coefficient scales with a small network trained
//! for identity preservation, and analyzes the stability of learned operators.

pub mod config;
pub mod encoder;
pub mod error;
pub mod inference;
pub mod io;
pub mod learning;
pub mod numerics;
pub mod operators;
pub mod pairing;
pub mod rng;
pub mod stability;
pub mod synth;

pub use error::{Error, Result};
pub use inference::{infer, infer_batch, InferenceConfig, InferenceReport, Method};
pub use numerics::{expm, expm_adjoint, expm_frechet, NumericsConfig, SquareMatrix};
pub use operators::{
    CoefficientVector, LaplacePrior, LatentPoint, OperatorDictionary, PointPair, TransportModel,
};

//! Spectral stability of learned operators and one-parameter path traces.

use std::f64::consts::PI;
use std::fmt::Write;

use rayon::prelude::*;

use crate::error::{check_dim, Result};
use crate::numerics::{eigenvalues, expm, SquareMatrix};
use crate::operators::{operator_magnitudes, OperatorDictionary};

/// Samples in the default coefficient range.
pub const DEFAULT_TRACE_SAMPLES: usize = 101;

/// `max_i |Re λ_i(Ψ)|`. Zero means every eigenvalue is purely imaginary.
pub fn operator_stability(psi: &SquareMatrix) -> Result<f64> {
    Ok(eigenvalues(psi)?
        .iter()
        .map(|e| e.re.abs())
        .fold(0.0, f64::max))
}

/// [`operator_stability`] for every operator in the dictionary.
pub fn stability_metric(dict: &OperatorDictionary) -> Result<Vec<f64>> {
    dict.operators()
        .par_iter()
        .map(operator_stability)
        .collect()
}

/// `‖ΨΨᵀ − ΨᵀΨ‖_F < tol`.
pub fn is_normal(psi: &SquareMatrix, tol: f64) -> bool {
    let t = psi.transpose();
    (&psi.matmul(&t) - &t.matmul(psi)).norm_frobenius() < tol
}

/// `samples` evenly spaced values over `[−π, π] / ‖Ψ‖_F` (over `[−π, π]` for a
/// zero operator).
pub fn default_coefficient_range(psi: &SquareMatrix, samples: usize) -> Vec<f64> {
    let mag = psi.norm_frobenius();
    let half = if mag > 0.0 { PI / mag } else { PI };
    match samples {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..samples)
            .map(|i| -half + 2.0 * half * i as f64 / (samples - 1) as f64)
            .collect(),
    }
}

/// Rows of `z(c) = expm(c Ψ_m) z0`, one per entry of `c_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTrace {
    pub coefficients: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl PathTrace {
    /// Largest `‖z(c)‖ / ‖z0‖` along the trace.
    pub fn max_growth(&self, z0: &[f64]) -> f64 {
        let base = z0.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.points
            .iter()
            .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt() / base)
            .fold(0.0, f64::max)
    }

    /// CSV with a `c` column followed by one column per coordinate.
    pub fn to_csv(&self) -> String {
        let d = self.points.first().map_or(0, Vec::len);
        let mut out = String::from("c");
        for i in 0..d {
            write!(out, ",z{i}").unwrap();
        }
        out.push('\n');
        for (c, p) in self.coefficients.iter().zip(&self.points) {
            write!(out, "{c:?}").unwrap();
            for v in p {
                write!(out, ",{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn path_trace(
    dict: &OperatorDictionary,
    m: usize,
    z0: &[f64],
    c_range: &[f64],
) -> Result<PathTrace> {
    let psi = dict.operator(m)?;
    check_dim(dict.dim(), z0.len())?;
    let points = c_range
        .par_iter()
        .map(|&c| {
            if c == 0.0 {
                return Ok(z0.to_vec());
            }
            expm(&psi.scaled(c))?.mul_vec(z0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathTrace {
        coefficients: c_range.to_vec(),
        points,
    })
}

/// CSV rows `operator_index,metric,magnitude`.
pub fn stability_csv(dict: &OperatorDictionary) -> Result<String> {
    let metrics = stability_metric(dict)?;
    let mut out = String::from("operator_index,metric,magnitude\n");
    for (i, (m, mag)) in metrics.iter().zip(operator_magnitudes(dict)).enumerate() {
        writeln!(out, "{i},{m:?},{mag:?}").unwrap();
    }
    Ok(out)
}

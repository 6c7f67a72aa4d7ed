//! Independent reference implementations shared by the integration tests.

#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;

use transop::rng::{self, TransopRng};
use transop::SquareMatrix;

pub fn gaussian_matrix(r: &mut TransopRng, d: usize) -> SquareMatrix {
    SquareMatrix::from_row_major(d, (0..d * d).map(|_| rng::normal(r)).collect()).unwrap()
}

/// Gaussian matrix rescaled to Frobenius norm `norm`.
pub fn matrix_with_norm(r: &mut TransopRng, d: usize, norm: f64) -> SquareMatrix {
    let m = gaussian_matrix(r, d);
    let f = m.norm_frobenius();
    m.scaled(norm / f)
}

pub fn skew(r: &mut TransopRng, d: usize) -> SquareMatrix {
    let m = gaussian_matrix(r, d);
    &m - &m.transpose()
}

/// Truncated power series `Σ_{k<terms} A^k / k!`.
pub fn taylor_expm(a: &SquareMatrix, terms: usize) -> SquareMatrix {
    let d = a.dim();
    let mut sum = SquareMatrix::identity(d);
    let mut term = SquareMatrix::identity(d);
    for k in 1..terms {
        term = term.matmul(a).scaled(1.0 / k as f64);
        sum = &sum + &term;
    }
    sum
}

pub fn rel_diff(a: &SquareMatrix, b: &SquareMatrix) -> f64 {
    (a - b).norm_frobenius() / b.norm_frobenius().max(1e-300)
}

pub fn rotate(theta: f64, z: &[f64]) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    vec![c * z[0] - s * z[1], s * z[0] + c * z[1]]
}

/// `½‖z1 − R(θ)z0‖² + ζ|θ|` written out in closed form.
pub fn so2_objective(theta: f64, z0: &[f64], z1: &[f64], zeta: f64) -> f64 {
    let r = rotate(theta, z0);
    0.5 * ((z1[0] - r[0]).powi(2) + (z1[1] - r[1]).powi(2)) + zeta * theta.abs()
}

/// Minimizer of [`so2_objective`] over a grid on `[−π, π]`.
pub fn grid_search_angle(z0: &[f64], z1: &[f64], zeta: f64, resolution: f64) -> f64 {
    let steps = (2.0 * PI / resolution).round() as usize;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=steps {
        let theta = -PI + i as f64 * resolution;
        let v = so2_objective(theta, z0, z1, zeta);
        if v < best.0 {
            best = (v, theta);
        }
    }
    best.1
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
pub fn jacobi_eigenvalues(a: &SquareMatrix) -> Vec<f64> {
    let n = a.dim();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn to_nalgebra(a: &SquareMatrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(a.dim(), a.dim(), a.as_slice())
}

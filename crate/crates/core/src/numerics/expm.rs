//! Matrix exponential by scaling and squaring with diagonal Padé approximants,
//! plus its Fréchet derivative and adjoint.
//!
//! Degree selection and the θ thresholds follow Higham (2005), "The scaling and
//! squaring method for the matrix exponential revisited". The Fréchet derivative
//! uses the block identity
//!
//! ```text
//! expm([[A, E], [0, A]]) = [[e^A, L(A, E)], [0, e^A]]
//! ```
//!
//! so it inherits the accuracy of the exponential itself.

use super::SquareMatrix;
use crate::error::{check_dim, Error, Result};

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the [m/m] approximant has backward error below unit roundoff.
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

/// Matrix exponential `e^a`.
pub fn expm(a: &SquareMatrix) -> Result<SquareMatrix> {
    let norm = a.norm_one();
    if !norm.is_finite() {
        return Err(Error::NonFinite { norm });
    }
    let n = a.dim();
    let result = if norm <= THETA_3 {
        pade_low(a, &B3)?
    } else if norm <= THETA_5 {
        pade_low(a, &B5)?
    } else if norm <= THETA_7 {
        pade_low(a, &B7)?
    } else if norm <= THETA_9 {
        pade_low(a, &B9)?
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let scaled = a.scaled(2f64.powi(-s));
        let mut r = pade13(&scaled)?;
        for _ in 0..s {
            r = r.matmul(&r);
        }
        r
    };
    if !result.is_finite() {
        return Err(Error::NonFinite { norm });
    }
    debug_assert_eq!(result.dim(), n);
    Ok(result)
}

fn pade_low(a: &SquareMatrix, b: &[f64]) -> Result<SquareMatrix> {
    let n = a.dim();
    let a2 = a.matmul(a);
    // powers[k] = A^(2k)
    let mut powers = vec![SquareMatrix::identity(n), a2.clone()];
    while powers.len() * 2 < b.len() {
        let next = powers.last().unwrap().matmul(&a2);
        powers.push(next);
    }
    let mut u_inner = SquareMatrix::zeros(n);
    let mut v = SquareMatrix::zeros(n);
    for (k, p) in powers.iter().enumerate() {
        v.axpy(b[2 * k], p);
        if 2 * k + 1 < b.len() {
            u_inner.axpy(b[2 * k + 1], p);
        }
    }
    let u = a.matmul(&u_inner);
    (&v - &u).solve(&(&v + &u))
}

fn pade13(a: &SquareMatrix) -> Result<SquareMatrix> {
    let n = a.dim();
    let b = &B13;
    let ident = SquareMatrix::identity(n);
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let mut u_hi = a6.scaled(b[13]);
    u_hi.axpy(b[11], &a4);
    u_hi.axpy(b[9], &a2);
    let mut u_inner = a6.matmul(&u_hi);
    u_inner.axpy(b[7], &a6);
    u_inner.axpy(b[5], &a4);
    u_inner.axpy(b[3], &a2);
    u_inner.axpy(b[1], &ident);
    let u = a.matmul(&u_inner);

    let mut v_hi = a6.scaled(b[12]);
    v_hi.axpy(b[10], &a4);
    v_hi.axpy(b[8], &a2);
    let mut v = a6.matmul(&v_hi);
    v.axpy(b[6], &a6);
    v.axpy(b[4], &a4);
    v.axpy(b[2], &a2);
    v.axpy(b[0], &ident);

    (&v - &u).solve(&(&v + &u))
}

/// Returns `(e^a, L(a, e))` where `L` is the Fréchet derivative of the exponential
/// at `a` in direction `e`.
pub fn expm_frechet(a: &SquareMatrix, e: &SquareMatrix) -> Result<(SquareMatrix, SquareMatrix)> {
    check_dim(a.dim(), e.dim())?;
    let n = a.dim();
    let e_norm = e.norm_one();
    if !e_norm.is_finite() {
        return Err(Error::NonFinite { norm: e_norm });
    }
    if e_norm == 0.0 {
        return Ok((expm(a)?, SquareMatrix::zeros(n)));
    }
    // L is linear in E: run the block exponential on a rescaled direction so the
    // off-diagonal block does not inflate the scaling parameter.
    let target = a.norm_one().max(1e-3);
    let factor = target / e_norm;
    let mut block = SquareMatrix::zeros(2 * n);
    block.set_block(0, 0, a);
    block.set_block(n, n, a);
    block.set_block(0, n, &e.scaled(factor));
    let big = expm(&block)?;
    let exp_a = big.block(0, 0, n);
    let mut deriv = big.block(0, n, n);
    deriv.scale_mut(1.0 / factor);
    Ok((exp_a, deriv))
}

/// Adjoint of the Fréchet derivative under the Frobenius inner product:
/// `⟨L(a, E), g⟩ = ⟨E, L*(a, g)⟩` for all `E`. Computed as `L(aᵀ, g)`.
pub fn expm_adjoint(a: &SquareMatrix, g: &SquareMatrix) -> Result<SquareMatrix> {
    check_dim(a.dim(), g.dim())?;
    Ok(expm_frechet(&a.transpose(), g)?.1)
}

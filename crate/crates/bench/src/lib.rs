//! Fixtures shared by the benchmark targets.

use transop::rng;
use transop::synth::{make_rotation_dataset, so2_generator};
use transop::{OperatorDictionary, PointPair, SquareMatrix};

/// Gaussian matrix rescaled to the given Frobenius norm.
pub fn random_matrix(dim: usize, norm: f64, seed: u64) -> SquareMatrix {
    let mut r = rng::seeded(seed);
    let m =
        SquareMatrix::from_row_major(dim, (0..dim * dim).map(|_| rng::normal(&mut r)).collect())
            .expect("square by construction");
    let f = m.norm_frobenius();
    m.scaled(norm / f)
}

pub fn so2_dictionary() -> OperatorDictionary {
    OperatorDictionary::new(vec![so2_generator()], 0.0).expect("valid generator")
}

/// `count` unit-norm random operators in `dim` dimensions.
pub fn random_dictionary(dim: usize, count: usize, seed: u64) -> OperatorDictionary {
    let ops = (0..count)
        .map(|m| random_matrix(dim, 1.0, rng::derive_seed(seed, m as u64)))
        .collect();
    OperatorDictionary::new(ops, 0.0).expect("matching dimensions")
}

/// Rotation pairs on the radius-3 circle with angles in ±1.
pub fn rotation_pairs(n: usize, seed: u64) -> Vec<PointPair> {
    make_rotation_dataset(n, 3.0, 1.0, 0.0, seed)
        .expect("valid parameters")
        .pairs
}

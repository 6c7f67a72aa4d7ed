//! Synthetic manifolds with known generators.

use std::f64::consts::PI;

use crate::error::{check_dim, Error, Result};
use crate::numerics::{expm, SquareMatrix};
use crate::operators::{LatentPoint, PointPair};
use crate::rng;

/// `[[0, −1], [1, 0]]`.
pub fn so2_generator() -> SquareMatrix {
    SquareMatrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).expect("fixed 2x2 matrix")
}

/// Skew-symmetric rotation generator acting in the `(i, j)` plane of `R^dim`.
pub fn plane_rotation(dim: usize, i: usize, j: usize) -> Result<SquareMatrix> {
    if i >= dim || j >= dim || i == j {
        return Err(Error::InvalidConfig(format!(
            "rotation plane ({i}, {j}) is not valid in dimension {dim}"
        )));
    }
    let mut g = SquareMatrix::zeros(dim);
    g[(i, j)] = -1.0;
    g[(j, i)] = 1.0;
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationDataset {
    pub points: Vec<LatentPoint>,
    /// `z1 = R(θ_i) z0_i` with `z0_i = points[i]`.
    pub pairs: Vec<PointPair>,
    pub angles: Vec<f64>,
    pub generator: SquareMatrix,
}

/// `n` points on a circle of the given radius (plus Gaussian noise) and one
/// rotated copy of each, with rotation angle uniform in `±angle_spread`.
pub fn make_rotation_dataset(
    n: usize,
    radius: f64,
    angle_spread: f64,
    noise: f64,
    seed: u64,
) -> Result<RotationDataset> {
    if n < 2 {
        return Err(Error::InvalidConfig("rotation dataset needs n >= 2".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidConfig("radius must be > 0".into()));
    }
    if !(angle_spread >= 0.0 && angle_spread.is_finite()) {
        return Err(Error::InvalidConfig("angle_spread must be >= 0".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidConfig("noise must be >= 0".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut points = Vec::with_capacity(n);
    let mut pairs = Vec::with_capacity(n);
    let mut angles = Vec::with_capacity(n);
    for _ in 0..n {
        let phi = rng::uniform(&mut rng, 0.0, 2.0 * PI);
        let mut z = vec![radius * phi.cos(), radius * phi.sin()];
        if noise > 0.0 {
            for v in &mut z {
                *v += noise * rng::normal(&mut rng);
            }
        }
        let theta = rng::uniform(&mut rng, -angle_spread, angle_spread);
        let (s, c) = theta.sin_cos();
        let z1 = vec![c * z[0] - s * z[1], s * z[0] + c * z[1]];
        pairs.push(PointPair::new(z.clone(), z1));
        points.push(LatentPoint::new(z));
        angles.push(theta);
    }
    Ok(RotationDataset {
        points,
        pairs,
        angles,
        generator: so2_generator(),
    })
}

/// Layout of a labeled multi-class manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSpec {
    /// One base point per class.
    pub bases: Vec<Vec<f64>>,
    /// Generators every class may use.
    pub shared: Vec<SquareMatrix>,
    /// Generators with the classes allowed to use them.
    pub class_specific: Vec<(SquareMatrix, Vec<usize>)>,
    /// Coefficients are drawn uniformly from `±coefficient_range`.
    pub coefficient_range: f64,
    pub n_per_class: usize,
}

/// Coefficient magnitudes over which a non-admissible generator pushes a
/// class base point at least half the nearest inter-base distance away.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakingWindow {
    pub class: usize,
    pub generator: usize,
    /// Smallest `|c|` at which the displacement reaches the half distance.
    pub threshold: f64,
    /// The displacement stays above the half distance for `|c|` up to here.
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorCatalog {
    /// Shared generators first, then class-specific ones.
    pub generators: Vec<SquareMatrix>,
    /// Generator indices each class may use.
    pub admissible: Vec<Vec<usize>>,
    /// Half of the smallest distance between two base points.
    pub half_distance: f64,
    /// Windows for each (class, non-admissible generator) that moves the base.
    pub breaking: Vec<BreakingWindow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassDataset {
    pub points: Vec<LatentPoint>,
    pub catalog: GeneratorCatalog,
}

const WINDOW_SCAN_STEP: f64 = 1e-3;
const WINDOW_SCAN_LIMIT: f64 = 10.0;

fn displacement(g: &SquareMatrix, c: f64, base: &[f64]) -> Result<f64> {
    let moved = expm(&g.scaled(c))?.mul_vec(base)?;
    Ok(moved
        .iter()
        .zip(base)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt())
}

fn breaking_window(g: &SquareMatrix, base: &[f64], half: f64) -> Result<Option<(f64, f64)>> {
    let steps = (WINDOW_SCAN_LIMIT / WINDOW_SCAN_STEP) as usize;
    let mut start = None;
    for k in 1..=steps {
        let c = k as f64 * WINDOW_SCAN_STEP;
        let far = displacement(g, c, base)? >= half && displacement(g, -c, base)? >= half;
        match (start, far) {
            (None, true) => start = Some(c),
            (Some(s), false) => return Ok(Some((s, c - WINDOW_SCAN_STEP))),
            _ => {}
        }
    }
    Ok(start.map(|s| (s, WINDOW_SCAN_LIMIT)))
}

/// Labeled points, each class transported from its base point by uniform
/// coefficients on its admissible generators.
pub fn make_multiclass_dataset(spec: &MulticlassSpec, seed: u64) -> Result<MulticlassDataset> {
    let classes = spec.bases.len();
    if classes == 0 {
        return Err(Error::InvalidConfig(
            "at least one class is required".into(),
        ));
    }
    let d = spec.bases[0].len();
    for b in &spec.bases {
        check_dim(d, b.len())?;
    }
    let generators: Vec<SquareMatrix> = spec
        .shared
        .iter()
        .cloned()
        .chain(spec.class_specific.iter().map(|(g, _)| g.clone()))
        .collect();
    if generators.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one generator is required".into(),
        ));
    }
    for g in &generators {
        check_dim(d, g.dim())?;
    }
    if !(spec.coefficient_range >= 0.0 && spec.coefficient_range.is_finite()) {
        return Err(Error::InvalidConfig(
            "coefficient_range must be >= 0".into(),
        ));
    }
    let mut admissible: Vec<Vec<usize>> = vec![(0..spec.shared.len()).collect(); classes];
    for (k, (_, allowed)) in spec.class_specific.iter().enumerate() {
        for &y in allowed {
            if y >= classes {
                return Err(Error::IndexOutOfRange {
                    index: y,
                    len: classes,
                });
            }
            admissible[y].push(spec.shared.len() + k);
        }
    }

    let mut min_dist = f64::INFINITY;
    for a in 0..classes {
        for b in a + 1..classes {
            let dist = spec.bases[a]
                .iter()
                .zip(&spec.bases[b])
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            min_dist = min_dist.min(dist);
        }
    }
    let half_distance = if min_dist.is_finite() {
        min_dist / 2.0
    } else {
        0.0
    };

    let mut breaking = Vec::new();
    if half_distance > 0.0 {
        for (y, base) in spec.bases.iter().enumerate() {
            for (gi, g) in generators.iter().enumerate() {
                if admissible[y].contains(&gi) {
                    continue;
                }
                if let Some((threshold, upper)) = breaking_window(g, base, half_distance)? {
                    breaking.push(BreakingWindow {
                        class: y,
                        generator: gi,
                        threshold,
                        upper,
                    });
                }
            }
        }
    }

    let mut rng = rng::seeded(seed);
    let mut points = Vec::with_capacity(classes * spec.n_per_class);
    for (y, base) in spec.bases.iter().enumerate() {
        for _ in 0..spec.n_per_class {
            let mut a = SquareMatrix::zeros(d);
            for &gi in &admissible[y] {
                let c = rng::uniform(&mut rng, -spec.coefficient_range, spec.coefficient_range);
                a.axpy(c, &generators[gi]);
            }
            points.push(LatentPoint::labeled(expm(&a)?.mul_vec(base)?, y));
        }
    }
    Ok(MulticlassDataset {
        points,
        catalog: GeneratorCatalog {
            generators,
            admissible,
            half_distance,
            breaking,
        },
    })
}

/// Two classes in `R^4`. Operator 0 rotates the `(0, 1)` plane and is shared;
/// operator 1 rotates the `(2, 3)` plane and is admissible for class A only.
///
/// Class A sits at `(2, 0, −0.5, 0)` and class B at `(−2, 0, 3, 0)`, with
/// coefficients uniform in `±π/4`. Operator 1 barely moves class A but swings
/// class B's third coordinate towards class A.
pub fn two_class_spec(n_per_class: usize) -> MulticlassSpec {
    MulticlassSpec {
        bases: vec![vec![2.0, 0.0, -0.5, 0.0], vec![-2.0, 0.0, 3.0, 0.0]],
        shared: vec![plane_rotation(4, 0, 1).expect("valid plane")],
        class_specific: vec![(plane_rotation(4, 2, 3).expect("valid plane"), vec![0])],
        coefficient_range: PI / 4.0,
        n_per_class,
    }
}

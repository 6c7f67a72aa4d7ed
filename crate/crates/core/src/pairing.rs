//! Training pair selection by k-nearest neighbors in a feature space.
//!
//! Features are either the latent vectors themselves or rows loaded from a
//! precomputed file (for example embeddings exported from a pretrained
//! classifier). Search is exhaustive.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io;
use crate::operators::{LatentPoint, PointPair};
use crate::rng;

/// Default neighbor count.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSource {
    /// Use the latent vectors as features.
    Identity { k: usize },
    /// One feature row per point.
    Precomputed { rows: Vec<Vec<f64>>, k: usize },
}

impl FeatureSource {
    pub fn identity(k: usize) -> Self {
        FeatureSource::Identity { k }
    }

    /// Loads a headerless numeric CSV with one row per point.
    pub fn from_file(path: &Path, k: usize) -> Result<Self> {
        Ok(FeatureSource::Precomputed {
            rows: io::read_feature_csv(path)?,
            k,
        })
    }

    pub fn k(&self) -> usize {
        match self {
            FeatureSource::Identity { k } | FeatureSource::Precomputed { k, .. } => *k,
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Indices of the `k` nearest rows to each row (self excluded), nearest first.
/// Equal distances are ordered by lower index.
pub fn nearest_neighbors(features: &[Vec<f64>], k: usize) -> Result<Vec<Vec<usize>>> {
    let n = features.len();
    if k < 1 || k >= n {
        return Err(Error::InvalidConfig(format!(
            "neighbor count k = {k} must satisfy 1 <= k < {n}"
        )));
    }
    let width = features[0].len();
    if let Some(bad) = features.iter().find(|r| r.len() != width) {
        return Err(Error::DimensionMismatch {
            expected: width,
            found: bad.len(),
        });
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(&features[i], &features[j]), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(k - 1, cmp);
            cand.truncate(k);
            cand.sort_by(cmp);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect())
}

/// `(anchor, neighbor)` index pairs: one per anchor, neighbor drawn uniformly
/// from the anchor's k nearest neighbors.
pub fn select_pair_indices(
    points: &[LatentPoint],
    src: &FeatureSource,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    let identity_rows;
    let features: &[Vec<f64>] = match src {
        FeatureSource::Identity { .. } => {
            identity_rows = points.iter().map(|p| p.z.clone()).collect::<Vec<_>>();
            &identity_rows
        }
        FeatureSource::Precomputed { rows, .. } => {
            if rows.len() != points.len() {
                return Err(Error::FeatureMismatch {
                    features: rows.len(),
                    points: points.len(),
                });
            }
            rows
        }
    };
    if features.len() > 1 && features.iter().all(|r| *r == features[0]) {
        return Err(Error::DegenerateData(
            "all feature rows are identical".into(),
        ));
    }
    let neighbors = nearest_neighbors(features, src.k())?;
    let mut rng = rng::seeded(seed);
    Ok(neighbors
        .iter()
        .enumerate()
        .map(|(i, nbrs)| (i, nbrs[rng.random_range(0..nbrs.len())]))
        .collect())
}

/// Point pairs with `z0` = anchor and `z1` = a random near neighbor.
pub fn select_pairs(
    points: &[LatentPoint],
    src: &FeatureSource,
    seed: u64,
) -> Result<Vec<PointPair>> {
    Ok(select_pair_indices(points, src, seed)?
        .into_iter()
        .map(|(a, b)| PointPair {
            z0: points[a].clone(),
            z1: points[b].clone(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Vec<LatentPoint> {
        xs.iter().map(|&x| LatentPoint::new(vec![x])).collect()
    }

    #[test]
    fn nearest_on_a_line() {
        let pts = line(&[0.0, 0.1, 0.9]);
        let idx = select_pair_indices(&pts, &FeatureSource::identity(1), 3).unwrap();
        assert_eq!(idx, vec![(0, 1), (1, 0), (2, 1)]);
    }

    #[test]
    fn ties_break_by_lower_index() {
        let feats = vec![vec![0.0], vec![-1.0], vec![1.0], vec![5.0]];
        let nn = nearest_neighbors(&feats, 2).unwrap();
        assert_eq!(nn[0], vec![1, 2]);
    }

    #[test]
    fn errors() {
        let pts = line(&[0.0, 1.0, 2.0]);
        let src = FeatureSource::Precomputed {
            rows: vec![vec![0.0]; 2],
            k: 1,
        };
        assert!(matches!(
            select_pairs(&pts, &src, 0),
            Err(Error::FeatureMismatch {
                features: 2,
                points: 3
            })
        ));
        assert!(matches!(
            select_pairs(&line(&[1.0, 1.0, 1.0]), &FeatureSource::identity(1), 0),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            select_pairs(&pts, &FeatureSource::identity(3), 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn precomputed_features_drive_the_choice() {
        // Latents say 0~1, features say 0~2.
        let pts = line(&[0.0, 0.1, 5.0]);
        let src = FeatureSource::Precomputed {
            rows: vec![vec![0.0], vec![9.0], vec![0.2]],
            k: 1,
        };
        let idx = select_pair_indices(&pts, &src, 0).unwrap();
        assert_eq!(idx[0], (0, 2));
    }
}

//! Transport-operator dictionaries and the transformations they generate.
//!
//! A dictionary holds `M` generators `Ψ_m` acting on a `d`-dimensional latent
//! space. A coefficient vector `c` selects the transformation
//! `T(c) = expm(Σ_m Ψ_m c_m)`, which moves a latent point along the manifold.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numerics::{expm, SquareMatrix};
use crate::rng;

/// Learned generators `Ψ_1 … Ψ_M` together with their Frobenius weight `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorDictionary {
    dim: usize,
    psi: Vec<SquareMatrix>,
    gamma: f64,
}

impl OperatorDictionary {
    pub fn new(psi: Vec<SquareMatrix>, gamma: f64) -> Result<Self> {
        let first = psi
            .first()
            .ok_or_else(|| Error::InvalidConfig("dictionary needs at least one operator".into()))?;
        let dim = first.dim();
        for op in &psi {
            check_dim(dim, op.dim())?;
            if !op.is_finite() {
                return Err(Error::NonFinite {
                    norm: op.norm_frobenius(),
                });
            }
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be >= 0, got {gamma}"
            )));
        }
        Ok(OperatorDictionary { dim, psi, gamma })
    }

    /// Latent dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of operators `M`.
    pub fn count(&self) -> usize {
        self.psi.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn operators(&self) -> &[SquareMatrix] {
        &self.psi
    }

    pub fn operator(&self, m: usize) -> Result<&SquareMatrix> {
        self.psi.get(m).ok_or(Error::IndexOutOfRange {
            index: m,
            len: self.psi.len(),
        })
    }

    pub(crate) fn operators_mut(&mut self) -> &mut [SquareMatrix] {
        &mut self.psi
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be >= 0, got {gamma}"
            )));
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// `A(c) = Σ_m Ψ_m c_m`.
    pub fn generator(&self, c: &[f64]) -> Result<SquareMatrix> {
        check_dim(self.count(), c.len())?;
        let mut a = SquareMatrix::zeros(self.dim);
        for (op, &cm) in self.psi.iter().zip(c) {
            if cm != 0.0 {
                a.axpy(cm, op);
            }
        }
        Ok(a)
    }

    /// `T(c) = expm(A(c))`.
    pub fn transformation(&self, c: &[f64]) -> Result<SquareMatrix> {
        expm(&self.generator(c)?)
    }

    /// `(γ/2) Σ ‖Ψ_m‖_F²`.
    pub fn frobenius_penalty(&self) -> f64 {
        0.5 * self.gamma * self.psi.iter().map(|p| p.inner(p)).sum::<f64>()
    }
}

/// Sparse coefficients `c ∈ R^M` selecting one transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientVector(pub Vec<f64>);

impl CoefficientVector {
    pub fn zeros(m: usize) -> Self {
        CoefficientVector(vec![0.0; m])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of nonzero entries.
    pub fn sparsity(&self) -> usize {
        self.0.iter().filter(|v| v.abs() > 0.0).count()
    }

    pub fn l1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn is_all_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }
}

impl From<Vec<f64>> for CoefficientVector {
    fn from(v: Vec<f64>) -> Self {
        CoefficientVector(v)
    }
}

/// A latent vector with an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPoint {
    pub z: Vec<f64>,
    pub label: Option<usize>,
}

impl LatentPoint {
    pub fn new(z: Vec<f64>) -> Self {
        LatentPoint { z, label: None }
    }

    pub fn labeled(z: Vec<f64>, label: usize) -> Self {
        LatentPoint {
            z,
            label: Some(label),
        }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn scaled(&self, s: f64) -> Self {
        LatentPoint {
            z: self.z.iter().map(|v| v * s).collect(),
            label: self.label,
        }
    }
}

/// Source and target of one training example.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPair {
    pub z0: LatentPoint,
    pub z1: LatentPoint,
}

impl PointPair {
    pub fn new(z0: Vec<f64>, z1: Vec<f64>) -> Self {
        PointPair {
            z0: LatentPoint::new(z0),
            z1: LatentPoint::new(z1),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        PointPair {
            z0: self.z0.scaled(s),
            z1: self.z1.scaled(s),
        }
    }
}

/// Factorial Laplace prior with a single scale `ζ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacePrior {
    zeta: f64,
}

impl LaplacePrior {
    pub fn new(zeta: f64) -> Result<Self> {
        if zeta > 0.0 && zeta.is_finite() {
            Ok(LaplacePrior { zeta })
        } else {
            Err(Error::InvalidScale(zeta))
        }
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Per-operator scales for `m` operators.
    pub fn scales(&self, m: usize) -> Vec<f64> {
        vec![self.zeta; m]
    }

    pub fn log_density(&self, c: &[f64]) -> f64 {
        c.iter()
            .map(|v| -(2.0 * self.zeta).ln() - v.abs() / self.zeta)
            .sum()
    }
}

/// Applies `T(c)` to `z`; the label is carried through unchanged.
pub fn transform(
    dict: &OperatorDictionary,
    c: &CoefficientVector,
    z: &LatentPoint,
) -> Result<LatentPoint> {
    check_dim(dict.dim(), z.dim())?;
    let t = dict.transformation(c.values())?;
    Ok(LatentPoint {
        z: t.mul_vec(&z.z)?,
        label: z.label,
    })
}

/// Reparameterized Laplace draw `−b·sgn(u)·ln(1 − 2|u|)` for `u ∈ (−½, ½)`.
pub fn sample_laplace(scale: f64, u: f64) -> f64 {
    debug_assert!(u.abs() < 0.5 && scale > 0.0);
    if u == 0.0 {
        return 0.0;
    }
    -scale * u.signum() * (-2.0 * u.abs()).ln_1p()
}

/// Draws `c_m ~ Laplace(0, ζ_m)` and returns `T(c)z + n` with `n ~ N(0, σ²I)`.
pub fn sample_transform(
    dict: &OperatorDictionary,
    z: &LatentPoint,
    scales: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<LatentPoint> {
    check_dim(dict.count(), scales.len())?;
    check_dim(dict.dim(), z.dim())?;
    if let Some(bad) = scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidScale(*bad));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let c: Vec<f64> = scales
        .iter()
        .map(|&s| sample_laplace(s, rng::centered_uniform(&mut rng)))
        .collect();
    let mut out = transform(dict, &CoefficientVector(c), z)?;
    if noise_sigma > 0.0 {
        for v in &mut out.z {
            *v += noise_sigma * rng::normal(&mut rng);
        }
    }
    Ok(out)
}

/// Points `z_t = expm(t · Σ Ψ_m c*_m) z0` for each multiplier `t`.
/// `t ∈ [0, 1]` interpolates towards the target, `t > 1` extrapolates past it.
pub fn generate_path(
    dict: &OperatorDictionary,
    c_star: &CoefficientVector,
    z0: &LatentPoint,
    t_values: &[f64],
) -> Result<Vec<LatentPoint>> {
    check_dim(dict.dim(), z0.dim())?;
    let a = dict.generator(c_star.values())?;
    t_values
        .iter()
        .map(|&t| {
            if !t.is_finite() {
                return Err(Error::NonFinite { norm: t.abs() });
            }
            if t == 0.0 {
                return Ok(z0.clone());
            }
            let step = expm(&a.scaled(t))?;
            Ok(LatentPoint {
                z: step.mul_vec(&z0.z)?,
                label: z0.label,
            })
        })
        .collect()
}

/// `‖Ψ_m‖_F` for every operator.
pub fn operator_magnitudes(dict: &OperatorDictionary) -> Vec<f64> {
    dict.operators()
        .iter()
        .map(|p| p.norm_frobenius())
        .collect()
}

/// On-disk model: a dictionary plus the latent scale applied to data before
/// inference.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportModel {
    pub dictionary: OperatorDictionary,
    pub latent_scale: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    dim: usize,
    count: usize,
    gamma: f64,
    operators: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latent_scale: Option<f64>,
}

impl TransportModel {
    pub fn new(dictionary: OperatorDictionary) -> Self {
        TransportModel {
            dictionary,
            latent_scale: 1.0,
        }
    }

    pub fn to_json(&self) -> String {
        let dict = &self.dictionary;
        let raw = ModelJson {
            dim: dict.dim(),
            count: dict.count(),
            gamma: dict.gamma(),
            operators: dict
                .operators()
                .iter()
                .map(|p| p.as_slice().to_vec())
                .collect(),
            latent_scale: Some(self.latent_scale),
        };
        serde_json::to_string_pretty(&raw).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ModelJson = serde_json::from_str(text)?;
        check_dim(raw.count, raw.operators.len())?;
        let psi = raw
            .operators
            .into_iter()
            .map(|entries| SquareMatrix::from_row_major(raw.dim, entries))
            .collect::<Result<Vec<_>>>()?;
        let latent_scale = raw.latent_scale.unwrap_or(1.0);
        if !(latent_scale > 0.0 && latent_scale.is_finite()) {
            return Err(Error::InvalidScale(latent_scale));
        }
        Ok(TransportModel {
            dictionary: OperatorDictionary::new(psi, raw.gamma)?,
            latent_scale,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.in_file(path))
    }
}

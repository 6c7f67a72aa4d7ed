//! Sparse coefficient inference between point pairs.
//!
//! For a pair `(z0, z1)` the coefficients minimize
//!
//! ```text
//! E(c) = ½‖z1 − expm(Σ Ψ_m c_m) z0‖² + (γ/2) Σ‖Ψ_m‖_F² + ζ‖c‖₁
//! ```
//!
//! by forward–backward splitting: a gradient step on the smooth term followed
//! by soft-thresholding, with a geometrically decaying step size.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::numerics::{expm, expm_adjoint, SquareMatrix};
use crate::operators::{CoefficientVector, OperatorDictionary, PointPair};
use crate::rng;

/// Solver settings. Defaults: `α₀ = 1e-2`, `α_k = 0.985^k α₀`, at most 800
/// iterations, stop when `‖c_{k+1} − c_k‖₂ < 1e-5`, `c₀ ~ N(0, 4e-4 I)`, one restart.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    pub zeta: f64,
    pub alpha0: f64,
    pub decay: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub init_variance: f64,
    pub restarts: usize,
    /// FISTA momentum. Off by default; it tends to hurt on these objectives.
    pub accelerate: bool,
    /// Keep the objective value after every iteration in the report.
    pub record_trace: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            zeta: 0.1,
            alpha0: 1e-2,
            decay: 0.985,
            max_iters: 800,
            tol: 1e-5,
            init_variance: 4e-4,
            restarts: 1,
            accelerate: false,
            record_trace: false,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return bad("zeta must be >= 0");
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad("alpha0 must be > 0");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must be in (0, 1]");
        }
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol must be > 0");
        }
        if !(self.init_variance >= 0.0 && self.init_variance.is_finite()) {
            return bad("init_variance must be >= 0");
        }
        if self.restarts < 1 {
            return bad("restarts must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceReport {
    pub coefficients: CoefficientVector,
    /// Full objective at the returned coefficients.
    pub objective: f64,
    /// `½‖z1 − T(c) z0‖²` at the returned coefficients.
    pub recon_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub all_zero: bool,
    /// Objective after each iteration (index 0 is the initial point); empty
    /// unless `record_trace` is set.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Proximal,
    Subgradient,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Proximal => "prox",
            Method::Subgradient => "subgrad",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "prox" | "proximal" => Some(Method::Proximal),
            "subgrad" | "subgradient" => Some(Method::Subgradient),
            _ => None,
        }
    }
}

/// Elementwise shrinkage `sign(c)·max(|c| − λ, 0)`.
pub fn soft_threshold(c: &[f64], lambda: f64) -> Vec<f64> {
    c.iter()
        .map(|&v| {
            let mag = v.abs() - lambda;
            if mag > 0.0 {
                v.signum() * mag
            } else {
                0.0
            }
        })
        .collect()
}

/// State of the smooth term at one coefficient vector.
pub(crate) struct SmoothState {
    pub generator: SquareMatrix,
    pub residual: Vec<f64>,
}

impl SmoothState {
    pub fn at(dict: &OperatorDictionary, c: &[f64], z0: &[f64], z1: &[f64]) -> Result<Self> {
        check_dim(dict.dim(), z0.len())?;
        check_dim(dict.dim(), z1.len())?;
        let generator = dict.generator(c)?;
        let moved = expm(&generator)?.mul_vec(z0)?;
        let residual = z1.iter().zip(&moved).map(|(a, b)| a - b).collect();
        Ok(SmoothState {
            generator,
            residual,
        })
    }

    pub fn recon(&self) -> f64 {
        0.5 * self.residual.iter().map(|v| v * v).sum::<f64>()
    }

    /// `L*(A, r z0ᵀ)`: pairing it with a generator direction `D` gives
    /// `rᵀ L(A, D) z0`, so the smooth term's gradient in any parameter that
    /// moves `A` along `D` is `−⟨D, ·⟩` of this matrix.
    pub fn sensitivity(&self, z0: &[f64]) -> Result<SquareMatrix> {
        expm_adjoint(&self.generator, &SquareMatrix::outer(&self.residual, z0)?)
    }
}

/// `E(c)` including the Frobenius term of the dictionary.
pub fn objective(
    dict: &OperatorDictionary,
    c: &CoefficientVector,
    z0: &[f64],
    z1: &[f64],
    zeta: f64,
) -> Result<f64> {
    let state = SmoothState::at(dict, c.values(), z0, z1)?;
    Ok(state.recon() + dict.frobenius_penalty() + zeta * c.l1())
}

/// Gradient of `½‖z1 − expm(A(c)) z0‖²` with respect to `c`.
///
/// Component `m` is `−rᵀ L(A, Ψ_m) z0 = −⟨L*(A, r z0ᵀ), Ψ_m⟩`, so one adjoint
/// evaluation serves every operator.
pub fn coefficient_gradient(
    dict: &OperatorDictionary,
    c: &CoefficientVector,
    z0: &[f64],
    z1: &[f64],
) -> Result<Vec<f64>> {
    let state = SmoothState::at(dict, c.values(), z0, z1)?;
    gradient_from_state(dict, &state, z0)
}

fn gradient_from_state(
    dict: &OperatorDictionary,
    state: &SmoothState,
    z0: &[f64],
) -> Result<Vec<f64>> {
    let sens = state.sensitivity(z0)?;
    Ok(dict.operators().iter().map(|p| -sens.inner(p)).collect())
}

fn initial_coefficients(m: usize, variance: f64, seed: u64, restart: usize) -> Vec<f64> {
    let mut rng = rng::stream(seed, restart as u64);
    let sd = variance.sqrt();
    (0..m).map(|_| sd * rng::normal(&mut rng)).collect()
}

// An iterate is abandoned once its objective exceeds this multiple of the
// starting objective.
const DIVERGENCE_FACTOR: f64 = 1e6;
const DIVERGENCE_FLOOR: f64 = 1e-12;

fn run_from(
    dict: &OperatorDictionary,
    z0: &[f64],
    z1: &[f64],
    cfg: &InferenceConfig,
    method: Method,
    c0: Vec<f64>,
) -> Result<InferenceReport> {
    let fixed = dict.frobenius_penalty();
    let total = |state: &SmoothState, c: &[f64]| {
        state.recon() + fixed + cfg.zeta * c.iter().map(|v| v.abs()).sum::<f64>()
    };

    let mut c = c0;
    let mut state = SmoothState::at(dict, &c, z0, z1)?;
    let mut value = total(&state, &c);
    if !value.is_finite() {
        return Err(Error::Divergent {
            iteration: 0,
            value,
        });
    }
    let limit = DIVERGENCE_FACTOR * value.max(DIVERGENCE_FLOOR);
    let mut trace = Vec::new();
    if cfg.record_trace {
        trace.push(value);
    }

    // FISTA bookkeeping (only used when accelerating).
    let mut previous = c.clone();
    let mut momentum_t = 1.0f64;

    let mut iterations = 0;
    let mut converged = false;
    let mut alpha = cfg.alpha0;
    for k in 0..cfg.max_iters {
        let (point, point_state) = if cfg.accelerate && k > 0 {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum_t * momentum_t).sqrt());
            let w = (momentum_t - 1.0) / t_next;
            momentum_t = t_next;
            let y: Vec<f64> = c
                .iter()
                .zip(&previous)
                .map(|(a, b)| a + w * (a - b))
                .collect();
            let s = SmoothState::at(dict, &y, z0, z1)?;
            (y, Some(s))
        } else {
            (c.clone(), None)
        };
        let grad = gradient_from_state(dict, point_state.as_ref().unwrap_or(&state), z0)?;

        let next: Vec<f64> = match method {
            Method::Proximal => {
                let stepped: Vec<f64> = point
                    .iter()
                    .zip(&grad)
                    .map(|(v, g)| v - alpha * g)
                    .collect();
                soft_threshold(&stepped, cfg.zeta * alpha)
            }
            Method::Subgradient => point
                .iter()
                .zip(&grad)
                .map(|(v, g)| {
                    let sub = if *v == 0.0 { 0.0 } else { v.signum() };
                    v - alpha * (g + cfg.zeta * sub)
                })
                .collect(),
        };

        let delta = next
            .iter()
            .zip(&c)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        previous = std::mem::replace(&mut c, next);
        iterations = k + 1;
        state = SmoothState::at(dict, &c, z0, z1)?;
        value = total(&state, &c);
        if !value.is_finite() || value > limit {
            return Err(Error::Divergent {
                iteration: iterations,
                value,
            });
        }
        if cfg.record_trace {
            trace.push(value);
        }
        if delta < cfg.tol {
            converged = true;
            break;
        }
        alpha *= cfg.decay;
    }

    let coefficients = CoefficientVector(c);
    Ok(InferenceReport {
        all_zero: coefficients.is_all_zero(),
        recon_error: state.recon(),
        objective: value,
        coefficients,
        iterations,
        converged,
        trace,
    })
}

fn solve(
    dict: &OperatorDictionary,
    z0: &[f64],
    z1: &[f64],
    cfg: &InferenceConfig,
    method: Method,
    seed: u64,
) -> Result<InferenceReport> {
    cfg.validate()?;
    check_dim(dict.dim(), z0.len())?;
    check_dim(dict.dim(), z1.len())?;
    let mut best: Option<InferenceReport> = None;
    let mut last_err = None;
    for restart in 0..cfg.restarts {
        let c0 = initial_coefficients(dict.count(), cfg.init_variance, seed, restart);
        match run_from(dict, z0, z1, cfg, method, c0) {
            Ok(report) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        report.objective < b.objective
                            || (report.objective == b.objective
                                && report.coefficients.l1() < b.coefficients.l1())
                    }
                };
                if better {
                    best = Some(report);
                }
            }
            Err(e @ Error::Divergent { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one restart ran"))
}

/// Proximal (forward–backward) coefficient inference for one pair.
pub fn infer(
    dict: &OperatorDictionary,
    z0: &[f64],
    z1: &[f64],
    cfg: &InferenceConfig,
    seed: u64,
) -> Result<InferenceReport> {
    solve(dict, z0, z1, cfg, Method::Proximal, seed)
}

/// Plain subgradient baseline sharing `infer`'s schedule and initialization.
pub fn infer_subgradient(
    dict: &OperatorDictionary,
    z0: &[f64],
    z1: &[f64],
    cfg: &InferenceConfig,
    seed: u64,
) -> Result<InferenceReport> {
    solve(dict, z0, z1, cfg, Method::Subgradient, seed)
}

pub fn infer_with(
    method: Method,
    dict: &OperatorDictionary,
    z0: &[f64],
    z1: &[f64],
    cfg: &InferenceConfig,
    seed: u64,
) -> Result<InferenceReport> {
    solve(dict, z0, z1, cfg, method, seed)
}

/// Infers every pair independently; pair `i` uses seed `derive_seed(seed, i)`.
/// Pairs run in parallel but the output equals sequential evaluation.
pub fn infer_batch(
    dict: &OperatorDictionary,
    pairs: &[PointPair],
    cfg: &InferenceConfig,
    seed: u64,
) -> Result<Vec<InferenceReport>> {
    cfg.validate()?;
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, pair)| {
            infer(
                dict,
                &pair.z0.z,
                &pair.z1.z,
                cfg,
                rng::derive_seed(seed, i as u64),
            )
            .map_err(|e| e.at_pair(i))
        })
        .collect()
}

/// One row of the inference benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub pair_index: usize,
    pub method: Method,
    pub iterations: usize,
    pub final_objective: f64,
    pub recon_error: f64,
    pub wall_time_ns: u128,
}

/// Runs each method on each pair sequentially with identical per-pair seeds.
pub fn benchmark(
    dict: &OperatorDictionary,
    pairs: &[PointPair],
    cfg: &InferenceConfig,
    methods: &[Method],
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(pairs.len() * methods.len());
    for &method in methods {
        for (i, pair) in pairs.iter().enumerate() {
            let start = Instant::now();
            let report = infer_with(
                method,
                dict,
                &pair.z0.z,
                &pair.z1.z,
                cfg,
                rng::derive_seed(seed, i as u64),
            )
            .map_err(|e| e.at_pair(i))?;
            let wall_time_ns = start.elapsed().as_nanos();
            rows.push(BenchRow {
                pair_index: i,
                method,
                iterations: report.iterations,
                final_objective: report.objective,
                recon_error: report.recon_error,
                wall_time_ns,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn so2() -> OperatorDictionary {
        let g = SquareMatrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap();
        OperatorDictionary::new(vec![g], 0.0).unwrap()
    }

    fn rotate(theta: f64, z: &[f64]) -> Vec<f64> {
        let (s, c) = theta.sin_cos();
        vec![c * z[0] - s * z[1], s * z[0] + c * z[1]]
    }

    #[test]
    fn soft_threshold_examples() {
        let out = soft_threshold(&[1.0, -0.2, 0.6], 0.5);
        let want = [0.5, 0.0, 0.1];
        for (a, b) in out.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(soft_threshold(&[1.0, -0.2, 0.6], 0.0), vec![1.0, -0.2, 0.6]);
        assert_eq!(soft_threshold(&[1.0, -0.2, 0.6], 1.0), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn objective_trivial_cases() {
        let z = [0.4, -1.1];
        let zero = objective(&so2(), &CoefficientVector::zeros(1), &z, &z, 0.3).unwrap();
        assert_eq!(zero, 0.0);
        let theta = 0.6;
        let z1 = rotate(theta, &z);
        let v = objective(&so2(), &vec![theta].into(), &z, &z1, 0.25).unwrap();
        assert!((v - 0.25 * theta).abs() < 1e-14);
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let z = [1.0, 2.0];
        let z1 = rotate(0.3, &z);
        let g = coefficient_gradient(&so2(), &vec![0.3].into(), &z, &z1).unwrap();
        assert!(g[0].abs() < 1e-13, "{g:?}");
    }

    #[test]
    fn identical_points_infer_zero() {
        let z = [3.0, -4.0];
        let cfg = InferenceConfig {
            zeta: 0.01,
            ..Default::default()
        };
        let r = infer(&so2(), &z, &z, &cfg, 5).unwrap();
        assert!(r.all_zero, "{r:?}");
        assert_eq!(r.coefficients.sparsity(), 0);
    }

    #[test]
    fn huge_zeta_zeroes_everything() {
        let z = [1.0, 0.0];
        let cfg = InferenceConfig {
            zeta: 1e6,
            ..Default::default()
        };
        let r = infer(&so2(), &z, &rotate(0.5, &z), &cfg, 1).unwrap();
        assert!(r.all_zero);
    }

    #[test]
    fn subgradient_shares_initialization() {
        // With ζ = 0 both updates coincide, so equal outputs imply an equal c₀.
        let z = [3.0, 0.0];
        let cfg = InferenceConfig {
            max_iters: 3,
            zeta: 0.0,
            init_variance: 1.0,
            ..Default::default()
        };
        let p = infer(&so2(), &z, &z, &cfg, 9).unwrap();
        let s = infer_subgradient(&so2(), &z, &z, &cfg, 9).unwrap();
        assert_eq!(p, s);
        let other = infer(&so2(), &z, &z, &cfg, 10).unwrap();
        assert_ne!(p.coefficients, other.coefficients);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let z = [1.0, 0.0];
        for cfg in [
            InferenceConfig {
                alpha0: 0.0,
                ..Default::default()
            },
            InferenceConfig {
                decay: 1.5,
                ..Default::default()
            },
            InferenceConfig {
                restarts: 0,
                ..Default::default()
            },
            InferenceConfig {
                zeta: -1.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                infer(&so2(), &z, &z, &cfg, 0),
                Err(Error::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn huge_step_diverges() {
        // Dilation generator: objective blows up for large positive steps.
        let dict = OperatorDictionary::new(vec![SquareMatrix::identity(2)], 0.0).unwrap();
        let cfg = InferenceConfig {
            alpha0: 50.0,
            zeta: 0.0,
            ..Default::default()
        };
        let r = infer(&dict, &[1.0, 1.0], &[3.0, 3.0], &cfg, 0);
        assert!(
            matches!(
                r,
                Err(Error::Divergent { .. }) | Err(Error::NonFinite { .. })
            ),
            "{r:?}"
        );
    }

    #[test]
    fn batch_error_carries_pair_index() {
        let pairs = vec![
            PointPair::new(vec![1.0, 0.0], vec![1.0, 0.0]),
            PointPair::new(vec![1.0], vec![1.0]),
        ];
        let err = infer_batch(&so2(), &pairs, &InferenceConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Pair { index: 1, .. }), "{err}");
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Proximal, Method::Subgradient] {
            assert_eq!(Method::parse(m.name()), Some(m));
        }
        assert_eq!(Method::parse("adam"), None);
    }
}

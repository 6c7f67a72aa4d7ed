//! Dictionary learning by alternating minimization: infer coefficients for a
//! batch of pairs with the dictionary fixed, then take one gradient step on
//! every generator with the coefficients fixed.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::inference::{infer, InferenceConfig, SmoothState};
use crate::numerics::SquareMatrix;
use crate::operators::{operator_magnitudes, CoefficientVector, OperatorDictionary, PointPair};
use crate::rng;

/// Operator magnitude above which training is declared diverged.
pub const DIVERGENCE_MAGNITUDE: f64 = 1e6;
/// Operators whose final magnitude falls below this are treated as decayed.
pub const DECAYED_MAGNITUDE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub lr_psi: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub init_variance_psi: f64,
    /// Multiplier applied to every latent vector before training.
    pub latent_scale: f64,
    pub seed: u64,
    /// Coefficient inference settings; `inference.zeta` is the ℓ1 weight.
    pub inference: InferenceConfig,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            lr_psi: 1e-3,
            epochs: 50,
            batch_size: 250,
            gamma: 2e-6,
            init_variance_psi: 0.05,
            latent_scale: 1.0,
            seed: 0,
            inference: InferenceConfig::default(),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.lr_psi >= 0.0 && self.lr_psi.is_finite()) {
            return bad("lr_psi must be >= 0");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be >= 0");
        }
        if !(self.init_variance_psi >= 0.0 && self.init_variance_psi.is_finite()) {
            return bad("init_variance_psi must be >= 0");
        }
        if !(self.latent_scale > 0.0 && self.latent_scale.is_finite()) {
            return bad("latent_scale must be > 0");
        }
        self.inference.validate()
    }
}

/// One dictionary gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    /// Batch-mean objective before the step.
    pub objective: f64,
    pub recon: f64,
    pub frobenius: f64,
    pub l1: f64,
    /// Decrease of the batch objective across the step (positive is good).
    pub e_psi_diff: f64,
    /// Fraction of pairs in the batch whose inferred coefficients were all zero.
    pub zero_fraction: f64,
    /// Operator magnitudes after the step.
    pub magnitudes: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let m = self.steps.first().map_or(0, |s| s.magnitudes.len());
        let mut out =
            String::from("step,epoch,objective,recon,frobenius,l1,e_psi_diff,zero_fraction");
        for i in 0..m {
            write!(out, ",magnitude_{i}").unwrap();
        }
        out.push('\n');
        for s in &self.steps {
            write!(
                out,
                "{},{},{:?},{:?},{:?},{:?},{:?},{:?}",
                s.step,
                s.epoch,
                s.objective,
                s.recon,
                s.frobenius,
                s.l1,
                s.e_psi_diff,
                s.zero_fraction
            )
            .unwrap();
            for v in &s.magnitudes {
                write!(out, ",{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Gradient of the pair objective with respect to every `Ψ_m` at fixed `c`:
/// `−c_m L*(A, r z0ᵀ) + γ Ψ_m`.
pub fn dictionary_gradient(
    dict: &OperatorDictionary,
    c: &CoefficientVector,
    z0: &[f64],
    z1: &[f64],
) -> Result<Vec<SquareMatrix>> {
    let state = SmoothState::at(dict, c.values(), z0, z1)?;
    gradient_with_state(dict, c, &state, z0)
}

fn gradient_with_state(
    dict: &OperatorDictionary,
    c: &CoefficientVector,
    state: &SmoothState,
    z0: &[f64],
) -> Result<Vec<SquareMatrix>> {
    let needs_sensitivity = c.values().iter().any(|v| *v != 0.0);
    let sens = if needs_sensitivity {
        Some(state.sensitivity(z0)?)
    } else {
        None
    };
    Ok(dict
        .operators()
        .iter()
        .zip(c.values())
        .map(|(psi, &cm)| {
            let mut g = psi.scaled(dict.gamma());
            if let (Some(s), true) = (&sens, cm != 0.0) {
                g.axpy(-cm, s);
            }
            g
        })
        .collect())
}

fn batch_recon(
    dict: &OperatorDictionary,
    pairs: &[&PointPair],
    coeffs: &[CoefficientVector],
) -> Result<f64> {
    let total: f64 = pairs
        .par_iter()
        .zip(coeffs)
        .map(|(p, c)| SmoothState::at(dict, c.values(), &p.z0.z, &p.z1.z).map(|s| s.recon()))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum();
    Ok(total / pairs.len() as f64)
}

/// Learns `m` operators from `pairs`.
pub fn train_dictionary(
    pairs: &[PointPair],
    m: usize,
    cfg: &TrainerConfig,
) -> Result<(OperatorDictionary, TrainLog)> {
    cfg.validate()?;
    if m < 1 {
        return Err(Error::InvalidConfig("operator count must be >= 1".into()));
    }
    let first = pairs
        .first()
        .ok_or_else(|| Error::InvalidConfig("training needs at least one pair".into()))?;
    let d = first.z0.dim();
    for (i, p) in pairs.iter().enumerate() {
        check_dim(d, p.z0.dim()).map_err(|e| e.at_pair(i))?;
        check_dim(d, p.z1.dim()).map_err(|e| e.at_pair(i))?;
    }
    let scaled: Vec<PointPair> = pairs.iter().map(|p| p.scaled(cfg.latent_scale)).collect();

    let mut init_rng = rng::stream(cfg.seed, 0);
    let sd = cfg.init_variance_psi.sqrt();
    let psi = (0..m)
        .map(|_| {
            let entries = (0..d * d)
                .map(|_| sd * rng::normal(&mut init_rng))
                .collect();
            SquareMatrix::from_row_major(d, entries)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dict = OperatorDictionary::new(psi, cfg.gamma)?;
    let mut log = TrainLog::default();

    let mut order: Vec<usize> = (0..scaled.len()).collect();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng::stream(cfg.seed, 1 + epoch as u64));
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&PointPair> = chunk.iter().map(|&i| &scaled[i]).collect();
            let step_seed = rng::derive_seed(cfg.seed, step as u64);
            let reports = batch
                .par_iter()
                .zip(chunk)
                .map(|(p, &i)| {
                    infer(
                        &dict,
                        &p.z0.z,
                        &p.z1.z,
                        &cfg.inference,
                        rng::derive_seed(step_seed, i as u64),
                    )
                    .map_err(|e| e.at_pair(i))
                })
                .collect::<Result<Vec<_>>>()?;
            let coeffs: Vec<CoefficientVector> =
                reports.iter().map(|r| r.coefficients.clone()).collect();

            let n = batch.len() as f64;
            let grads = batch
                .par_iter()
                .zip(&coeffs)
                .map(|(p, c)| {
                    let state = SmoothState::at(&dict, c.values(), &p.z0.z, &p.z1.z)?;
                    Ok((
                        state.recon(),
                        gradient_with_state(&dict, c, &state, &p.z0.z)?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let recon = grads.iter().map(|(r, _)| r).sum::<f64>() / n;
            let mut mean_grad = vec![SquareMatrix::zeros(d); m];
            for (_, g) in &grads {
                for (acc, gm) in mean_grad.iter_mut().zip(g) {
                    acc.axpy(1.0 / n, gm);
                }
            }
            let frobenius = dict.frobenius_penalty();
            let l1 = cfg.inference.zeta * coeffs.iter().map(|c| c.l1()).sum::<f64>() / n;
            let zero_fraction = coeffs.iter().filter(|c| c.is_all_zero()).count() as f64 / n;

            for (psi, g) in dict.operators_mut().iter_mut().zip(&mean_grad) {
                psi.axpy(-cfg.lr_psi, g);
            }

            let magnitudes = operator_magnitudes(&dict);
            if let Some(&bad) = magnitudes
                .iter()
                .find(|v| !v.is_finite() || **v > DIVERGENCE_MAGNITUDE)
            {
                return Err(Error::Diverged {
                    step,
                    magnitude: bad,
                });
            }
            let after = batch_recon(&dict, &batch, &coeffs)? + dict.frobenius_penalty();

            log.steps.push(StepRecord {
                step,
                epoch,
                objective: recon + frobenius + l1,
                recon,
                frobenius,
                l1,
                e_psi_diff: (recon + frobenius) - after,
                zero_fraction,
                magnitudes,
            });
            step += 1;
        }
    }
    Ok((dict, log))
}

/// Failure signs of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct HealthReport {
    /// Fraction of steps whose objective went up across the dictionary update.
    pub negative_diff_fraction: f64,
    /// Every operator ended below [`DECAYED_MAGNITUDE`].
    pub all_decayed: bool,
    /// Every pair in the final batch inferred all-zero coefficients.
    pub all_coefficients_zero: bool,
    /// A non-finite objective or an operator above [`DIVERGENCE_MAGNITUDE`].
    pub diverged: bool,
}

impl HealthReport {
    pub fn is_healthy(&self) -> bool {
        self.negative_diff_fraction < 0.5
            && !self.all_decayed
            && !self.all_coefficients_zero
            && !self.diverged
    }
}

pub fn health_report(log: &TrainLog) -> Result<HealthReport> {
    let last = log
        .steps
        .last()
        .ok_or_else(|| Error::InvalidConfig("health report needs a non-empty log".into()))?;
    let negative = log.steps.iter().filter(|s| s.e_psi_diff < 0.0).count();
    let diverged = log.steps.iter().any(|s| {
        !s.objective.is_finite()
            || s.magnitudes
                .iter()
                .any(|v| !v.is_finite() || *v > DIVERGENCE_MAGNITUDE)
    });
    Ok(HealthReport {
        negative_diff_fraction: negative as f64 / log.steps.len() as f64,
        all_decayed: last.magnitudes.iter().all(|v| *v < DECAYED_MAGNITUDE),
        all_coefficients_zero: last.zero_fraction >= 1.0,
        diverged,
    })
}

/// Number of operators whose magnitude is below `fraction` of the largest one.
pub fn pruned_operator_count(magnitudes: &[f64], fraction: f64) -> usize {
    let max = magnitudes.iter().cloned().fold(0.0, f64::max);
    magnitudes.iter().filter(|v| **v < fraction * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(diff: f64, mags: Vec<f64>, zero_fraction: f64) -> StepRecord {
        StepRecord {
            step: 0,
            epoch: 0,
            objective: 1.0,
            recon: 1.0,
            frobenius: 0.0,
            l1: 0.0,
            e_psi_diff: diff,
            zero_fraction,
            magnitudes: mags,
        }
    }

    #[test]
    fn gradient_at_zero_coefficients_is_frobenius_term() {
        let psi = SquareMatrix::from_rows(&[&[0.1, 0.2], &[0.3, 0.4]]).unwrap();
        let dict = OperatorDictionary::new(vec![psi.clone()], 0.5).unwrap();
        let g = dictionary_gradient(
            &dict,
            &CoefficientVector::zeros(1),
            &[1.0, 2.0],
            &[0.0, 1.0],
        )
        .unwrap();
        assert_eq!(g[0], psi.scaled(0.5));
    }

    #[test]
    fn zero_residual_without_gamma_has_zero_gradient() {
        let g = SquareMatrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap();
        let dict = OperatorDictionary::new(vec![g], 0.0).unwrap();
        let c = CoefficientVector(vec![0.4]);
        let z0 = [1.0, 0.0];
        let z1 = crate::operators::transform(&dict, &c, &crate::LatentPoint::new(z0.to_vec()))
            .unwrap()
            .z;
        for m in dictionary_gradient(&dict, &c, &z0, &z1).unwrap() {
            assert!(m.norm_max() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use crate::numerics::fd;
        let mut rng = rng::seeded(11);
        for _ in 0..10 {
            let mats: Vec<SquareMatrix> = (0..2)
                .map(|_| {
                    let e = (0..9).map(|_| 0.5 * rng::normal(&mut rng)).collect();
                    SquareMatrix::from_row_major(3, e).unwrap()
                })
                .collect();
            let dict = OperatorDictionary::new(mats.clone(), 1e-3).unwrap();
            let c = CoefficientVector((0..2).map(|_| rng::normal(&mut rng)).collect());
            let z0: Vec<f64> = (0..3).map(|_| rng::normal(&mut rng)).collect();
            let z1: Vec<f64> = (0..3).map(|_| rng::normal(&mut rng)).collect();
            let grads = dictionary_gradient(&dict, &c, &z0, &z1).unwrap();
            for m in 0..2 {
                let f = |x: &[f64]| {
                    let mut ops = mats.clone();
                    ops[m] = SquareMatrix::from_row_major(3, x.to_vec()).unwrap();
                    let d = OperatorDictionary::new(ops, 1e-3).unwrap();
                    let s = SmoothState::at(&d, c.values(), &z0, &z1).unwrap();
                    s.recon() + d.frobenius_penalty()
                };
                let err = fd::check_gradient(f, mats[m].as_slice(), grads[m].as_slice(), 1e-6);
                assert!(err < 1e-5, "operator {m}: relative error {err}");
            }
        }
    }

    #[test]
    fn health_flags() {
        let log = TrainLog {
            steps: vec![
                record(0.1, vec![1.0, 2.0], 0.0),
                record(-0.1, vec![1e-9, 1e-10], 1.0),
            ],
        };
        let h = health_report(&log).unwrap();
        assert_eq!(h.negative_diff_fraction, 0.5);
        assert!(h.all_decayed);
        assert!(h.all_coefficients_zero);
        assert!(!h.diverged);
        assert!(!h.is_healthy());

        let blown = TrainLog {
            steps: vec![record(0.1, vec![f64::NAN], 0.0)],
        };
        assert!(health_report(&blown).unwrap().diverged);
        assert!(health_report(&TrainLog::default()).is_err());
    }

    #[test]
    fn pruning_count() {
        assert_eq!(pruned_operator_count(&[1.0, 0.01, 0.04, 0.5], 0.05), 2);
        assert_eq!(pruned_operator_count(&[0.0, 0.0], 0.05), 0);
    }

    #[test]
    fn config_validation() {
        let pairs = vec![PointPair::new(vec![1.0, 0.0], vec![0.0, 1.0])];
        for cfg in [
            TrainerConfig {
                epochs: 0,
                ..Default::default()
            },
            TrainerConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainerConfig {
                latent_scale: 0.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                train_dictionary(&pairs, 1, &cfg),
                Err(Error::InvalidConfig(_))
            ));
        }
        assert!(train_dictionary(&[], 1, &TrainerConfig::default()).is_err());
        let mixed = vec![
            PointPair::new(vec![1.0, 0.0], vec![0.0, 1.0]),
            PointPair::new(vec![1.0], vec![0.0]),
        ];
        assert!(matches!(
            train_dictionary(&mixed, 1, &TrainerConfig::default()),
            Err(Error::Pair { index: 1, .. })
        ));
    }

    #[test]
    fn log_csv_has_one_row_per_step() {
        let log = TrainLog {
            steps: vec![
                record(0.1, vec![1.0, 2.0], 0.0),
                record(0.2, vec![1.0, 2.0], 0.0),
            ],
        };
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].ends_with("magnitude_0,magnitude_1"));
    }
}

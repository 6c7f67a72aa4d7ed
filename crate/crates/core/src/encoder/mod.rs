//! Per-point coefficient scales trained so that sampled transformations keep
//! a classifier's prediction, with a KL pull towards a fixed Laplace prior.

mod classifier;
mod network;

pub use classifier::{train_classifier, Classifier, ClassifierConfig, ClassifierFit};
pub use network::{Dense, ScaleEncoder};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::io;
use crate::numerics::{expm, expm_adjoint, SquareMatrix};
use crate::operators::{sample_laplace, LatentPoint, OperatorDictionary};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub zeta_prior: f64,
    pub kl_weight: f64,
    /// Coefficient samples averaged per point and step.
    pub samples_j: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Multiplier on encoded scales when sampling coefficients.
    pub coefficient_spread: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            zeta_prior: 0.1,
            kl_weight: 0.5,
            samples_j: 1,
            lr: 1e-2,
            epochs: 50,
            batch_size: 32,
            coefficient_spread: 0.1,
            hidden: vec![64, 64],
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.zeta_prior > 0.0 && self.zeta_prior.is_finite()) {
            return Err(Error::InvalidScale(self.zeta_prior));
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return bad("kl_weight must be >= 0");
        }
        if self.samples_j < 1 {
            return bad("samples_j must be >= 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be > 0");
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return bad("epochs and batch_size must be >= 1");
        }
        if !(self.coefficient_spread > 0.0 && self.coefficient_spread.is_finite()) {
            return bad("coefficient_spread must be > 0");
        }
        Ok(())
    }

    /// A fresh encoder for `dict` with every scale starting at the prior.
    pub fn new_encoder(&self, dict: &OperatorDictionary) -> Result<ScaleEncoder> {
        ScaleEncoder::new(
            dict.dim(),
            &self.hidden,
            dict.count(),
            self.zeta_prior,
            self.seed,
        )
    }
}

/// `KL(Laplace(0, h) ‖ Laplace(0, ζ)) = ln ζ − ln h + h/ζ − 1`.
pub fn kl_laplace(h: f64, zeta: f64) -> Result<f64> {
    for s in [h, zeta] {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidScale(s));
        }
    }
    let ratio = h / zeta;
    Ok(ratio - ratio.ln() - 1.0)
}

fn kl_derivative(h: f64, zeta: f64) -> f64 {
    1.0 / zeta - 1.0 / h
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLoss {
    /// Classification term plus weighted KL.
    pub loss: f64,
    /// Mean of `−ln r_y(ẑ)` over the samples.
    pub classification: f64,
    /// Unweighted `Σ_m KL(h_m, ζ)`.
    pub kl: f64,
    /// Gradient with respect to [`ScaleEncoder::params`].
    pub gradient: Vec<f64>,
}

/// Loss and parameter gradient at one labeled point. Coefficients are
/// `ĉ_m = spread · h_m · ℓ_m` with `ℓ_m` a unit Laplace draw from `seed`.
pub fn encoder_loss(
    enc: &ScaleEncoder,
    classifier: &Classifier,
    dict: &OperatorDictionary,
    z: &LatentPoint,
    cfg: &EncoderConfig,
    seed: u64,
) -> Result<EncoderLoss> {
    point_loss(enc, classifier, dict, z, cfg, seed, 0)
}

fn point_loss(
    enc: &ScaleEncoder,
    classifier: &Classifier,
    dict: &OperatorDictionary,
    z: &LatentPoint,
    cfg: &EncoderConfig,
    seed: u64,
    index: usize,
) -> Result<EncoderLoss> {
    let label = z.label.ok_or(Error::UnlabeledPoint(index))?;
    check_dim(dict.count(), enc.output_dim())?;
    check_dim(dict.dim(), z.dim())?;
    let trace = enc.trace(&z.z)?;
    let h = &trace.scales;
    let m = dict.count();
    let spread = cfg.coefficient_spread;

    let mut rng = rng::seeded(seed);
    let mut classification = 0.0;
    let mut d_scales = vec![0.0; m];
    for _ in 0..cfg.samples_j {
        let unit: Vec<f64> = (0..m)
            .map(|_| sample_laplace(1.0, rng::centered_uniform(&mut rng)))
            .collect();
        let c: Vec<f64> = h.iter().zip(&unit).map(|(h, l)| spread * h * l).collect();
        let a = dict.generator(&c)?;
        let moved = expm(&a)?.mul_vec(&z.z)?;
        let (loss, g) = classifier.loss_and_input_gradient(&moved, label)?;
        classification += loss;
        // ∂loss/∂ĉ_m = gᵀ L(A, Ψ_m) z = ⟨L*(A, g zᵀ), Ψ_m⟩
        let sens = expm_adjoint(&a, &SquareMatrix::outer(&g, &z.z)?)?;
        for ((d, psi), l) in d_scales.iter_mut().zip(dict.operators()).zip(&unit) {
            *d += spread * l * sens.inner(psi);
        }
    }
    let j = cfg.samples_j as f64;
    classification /= j;
    let mut kl = 0.0;
    for (d, &hm) in d_scales.iter_mut().zip(h) {
        *d = *d / j + cfg.kl_weight * kl_derivative(hm, cfg.zeta_prior);
        kl += kl_laplace(hm, cfg.zeta_prior)?;
    }
    Ok(EncoderLoss {
        loss: classification + cfg.kl_weight * kl,
        classification,
        kl,
        gradient: enc.backward(&trace, &d_scales),
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EncoderTrainLog {
    /// Mean loss over each epoch's steps.
    pub epoch_loss: Vec<f64>,
    /// Mean encoded scale over all points and operators; index 0 is before
    /// training, index `e` after epoch `e`.
    pub mean_scale: Vec<f64>,
}

impl EncoderTrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,mean_scale\n");
        out.push_str(&format!("0,,{:?}\n", self.mean_scale[0]));
        for (e, (l, s)) in self
            .epoch_loss
            .iter()
            .zip(&self.mean_scale[1..])
            .enumerate()
        {
            out.push_str(&format!("{},{l:?},{s:?}\n", e + 1));
        }
        out
    }
}

/// Mean of `h(z)_m` over all points and operators.
pub fn mean_scale(enc: &ScaleEncoder, points: &[LatentPoint]) -> Result<f64> {
    let scales = points
        .par_iter()
        .map(|p| enc.forward(&p.z))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = scales.iter().flatten().sum();
    Ok(total / (points.len() * enc.output_dim()) as f64)
}

/// Minibatch gradient descent on the mean encoder loss. The classifier and
/// dictionary are left untouched.
pub fn train_encoder(
    enc: &ScaleEncoder,
    classifier: &Classifier,
    dict: &OperatorDictionary,
    points: &[LatentPoint],
    cfg: &EncoderConfig,
) -> Result<(ScaleEncoder, EncoderTrainLog)> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::InvalidConfig("encoder training needs points".into()));
    }
    classifier::labels_of(points)?;
    let mut enc = enc.clone();
    let mut params = enc.params();
    let mut log = EncoderTrainLog {
        epoch_loss: Vec::with_capacity(cfg.epochs),
        mean_scale: vec![mean_scale(&enc, points)?],
    };
    let mut order: Vec<usize> = (0..points.len()).collect();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng::stream(cfg.seed, 1 + epoch as u64));
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let step_seed = rng::derive_seed(cfg.seed, step as u64);
            let losses = chunk
                .par_iter()
                .map(|&i| {
                    point_loss(
                        &enc,
                        classifier,
                        dict,
                        &points[i],
                        cfg,
                        rng::derive_seed(step_seed, i as u64),
                        i,
                    )
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| match e {
                    Error::NonFinite { norm } => Error::Diverged {
                        step,
                        magnitude: norm,
                    },
                    other => other,
                })?;
            let n = chunk.len() as f64;
            let loss = losses.iter().map(|l| l.loss).sum::<f64>() / n;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    step,
                    magnitude: loss,
                });
            }
            let mut grad = vec![0.0; params.len()];
            for l in &losses {
                for (g, v) in grad.iter_mut().zip(&l.gradient) {
                    *g += v;
                }
            }
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= cfg.lr * g / n;
            }
            if params.iter().any(|p| !p.is_finite()) {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() / n;
                return Err(Error::Diverged {
                    step,
                    magnitude: norm,
                });
            }
            enc.set_params(&params)?;
            epoch_loss += loss;
            batches += 1;
            step += 1;
        }
        log.epoch_loss.push(epoch_loss / batches as f64);
        log.mean_scale.push(mean_scale(&enc, points)?);
    }
    Ok((enc, log))
}

/// Classes × operators table of mean encoded scales; row `y` averages over
/// points labeled `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadMatrix {
    pub rows: Vec<Vec<f64>>,
}

impl SpreadMatrix {
    pub fn get(&self, class: usize, operator: usize) -> f64 {
        self.rows[class][operator]
    }

    pub fn to_csv(&self) -> String {
        let rows: Vec<(String, Vec<f64>)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(y, r)| (y.to_string(), r.clone()))
            .collect();
        io::labeled_matrix_csv("class", "op", &rows)
    }
}

pub fn spread_matrix(enc: &ScaleEncoder, points: &[LatentPoint]) -> Result<SpreadMatrix> {
    let labels = classifier::labels_of(points)?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let m = enc.output_dim();
    let scales = points
        .par_iter()
        .map(|p| enc.forward(&p.z))
        .collect::<Result<Vec<_>>>()?;
    let mut sums = vec![vec![0.0; m]; classes];
    let mut counts = vec![0usize; classes];
    for (h, &y) in scales.iter().zip(&labels) {
        counts[y] += 1;
        for (s, v) in sums[y].iter_mut().zip(h) {
            *s += v;
        }
    }
    if let Some(empty) = counts.iter().position(|c| *c == 0) {
        return Err(Error::EmptyClass(empty));
    }
    for (row, &c) in sums.iter_mut().zip(&counts) {
        for v in row.iter_mut() {
            *v /= c as f64;
        }
    }
    Ok(SpreadMatrix { rows: sums })
}

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::operators::LatentPoint;

/// Multinomial logistic model on standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub classes: usize,
    pub dim: usize,
    /// Per-feature mean and spread used to standardize inputs.
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// `classes × dim`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Weight decay on the weights (not the biases).
    pub l2: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            lr: 0.5,
            epochs: 3000,
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierFit {
    pub classifier: Classifier,
    /// Fraction of training points whose most probable class is their label.
    pub accuracy: f64,
    /// Mean cross-entropy on the training points.
    pub loss: f64,
}

fn softmax(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in logits.iter_mut() {
        *v /= total;
    }
}

impl Classifier {
    fn standardize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    fn logits_std(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Class probabilities at `z`.
    pub fn probabilities(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, z.len())?;
        let mut p = self.logits_std(&self.standardize(z));
        softmax(&mut p);
        Ok(p)
    }

    pub fn predict(&self, z: &[f64]) -> Result<usize> {
        let p = self.probabilities(z)?;
        Ok((0..p.len()).fold(0, |best, k| if p[k] > p[best] { k } else { best }))
    }

    /// `−ln r_y(z)` and its gradient with respect to `z`.
    pub fn loss_and_input_gradient(&self, z: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        check_dim(self.dim, z.len())?;
        if label >= self.classes {
            return Err(Error::IndexOutOfRange {
                index: label,
                len: self.classes,
            });
        }
        let mut logits = self.logits_std(&self.standardize(z));
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        let loss = log_norm - logits[label];
        softmax(&mut logits);
        logits[label] -= 1.0;
        let grad = (0..self.dim)
            .map(|j| {
                let back: f64 = logits
                    .iter()
                    .enumerate()
                    .map(|(k, d)| d * self.weights[k * self.dim + j])
                    .sum();
                back / self.scale[j]
            })
            .collect();
        Ok((loss, grad))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("classifier serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Classifier = serde_json::from_str(text)?;
        for len in [c.mean.len(), c.scale.len()] {
            check_dim(c.dim, len)?;
        }
        check_dim(c.classes * c.dim, c.weights.len())?;
        check_dim(c.classes, c.bias.len())?;
        if let Some(s) = c.scale.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidScale(*s));
        }
        Ok(c)
    }
}

/// Labels of `points`, or the index of the first unlabeled one.
pub(crate) fn labels_of(points: &[LatentPoint]) -> Result<Vec<usize>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| p.label.ok_or(Error::UnlabeledPoint(i)))
        .collect()
}

/// Full-batch gradient descent on the mean cross-entropy, starting from zero
/// weights. Classes are `0..=max label`.
pub fn train_classifier(points: &[LatentPoint], cfg: &ClassifierConfig) -> Result<ClassifierFit> {
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) || cfg.epochs == 0 {
        return Err(Error::InvalidConfig(
            "classifier needs lr > 0 and epochs >= 1".into(),
        ));
    }
    if !(cfg.l2 >= 0.0 && cfg.l2.is_finite()) {
        return Err(Error::InvalidConfig("classifier l2 must be >= 0".into()));
    }
    let labels = labels_of(points)?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; classes];
    for &y in &labels {
        present[y] = true;
    }
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(Error::DegenerateLabels(
            "at least two classes are required".into(),
        ));
    }
    let dim = points[0].dim();
    for p in points {
        check_dim(dim, p.dim())?;
    }
    let n = points.len() as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|j| points.iter().map(|p| p.z[j]).sum::<f64>() / n)
        .collect();
    let scale: Vec<f64> = (0..dim)
        .map(|j| {
            let var = points
                .iter()
                .map(|p| (p.z[j] - mean[j]).powi(2))
                .sum::<f64>()
                / n;
            if var.sqrt() > 1e-12 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut clf = Classifier {
        classes,
        dim,
        mean,
        scale,
        weights: vec![0.0; classes * dim],
        bias: vec![0.0; classes],
    };
    let xs: Vec<Vec<f64>> = points.iter().map(|p| clf.standardize(&p.z)).collect();

    for _ in 0..cfg.epochs {
        let mut gw = vec![0.0; classes * dim];
        let mut gb = vec![0.0; classes];
        for (x, &y) in xs.iter().zip(&labels) {
            let mut p = clf.logits_std(x);
            softmax(&mut p);
            p[y] -= 1.0;
            for (k, d) in p.iter().enumerate() {
                gb[k] += d;
                for (g, v) in gw[k * dim..(k + 1) * dim].iter_mut().zip(x) {
                    *g += d * v;
                }
            }
        }
        for (w, g) in clf.weights.iter_mut().zip(&gw) {
            *w -= cfg.lr * (g / n + cfg.l2 * *w);
        }
        for (b, g) in clf.bias.iter_mut().zip(&gb) {
            *b -= cfg.lr * g / n;
        }
    }

    let mut correct = 0usize;
    let mut loss = 0.0;
    for (p, &y) in points.iter().zip(&labels) {
        if clf.predict(&p.z)? == y {
            correct += 1;
        }
        loss += clf.loss_and_input_gradient(&p.z, y)?.0;
    }
    Ok(ClassifierFit {
        classifier: clf,
        accuracy: correct as f64 / n,
        loss: loss / n,
    })
}

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng;

/// Fully connected layer, weights stored row-major as `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(e^s − 1)`, the pre-activation whose softplus is `s`.
pub(crate) fn softplus_inverse(s: f64) -> f64 {
    if s > 30.0 {
        s
    } else {
        s.exp_m1().ln()
    }
}

/// Feed-forward map from a latent point to per-operator Laplace scales:
/// tanh hidden layers and a softplus output, so every scale is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEncoder {
    layers: Vec<Dense>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub(crate) struct Trace {
    /// Inputs to each layer (index 0 is the latent point).
    activations: Vec<Vec<f64>>,
    /// Output-layer pre-activations.
    logits: Vec<f64>,
    pub scales: Vec<f64>,
}

impl ScaleEncoder {
    /// Random hidden weights with variance `1/fan_in`, a near-zero output layer
    /// and output biases chosen so every scale starts near `initial_scale`.
    pub fn new(
        input_dim: usize,
        hidden: &[usize],
        outputs: usize,
        initial_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || outputs == 0 || hidden.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be >= 1".into()));
        }
        if !(initial_scale > 0.0 && initial_scale.is_finite()) {
            return Err(Error::InvalidScale(initial_scale));
        }
        let mut rng = rng::seeded(seed);
        let widths: Vec<usize> = std::iter::once(input_dim)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(outputs))
            .collect();
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (inputs, outs) = (w[0], w[1]);
                let sd = if k == last { 0.1 } else { 1.0 } / (inputs as f64).sqrt();
                let weights = (0..inputs * outs)
                    .map(|_| sd * rng::normal(&mut rng))
                    .collect();
                let bias = if k == last {
                    vec![softplus_inverse(initial_scale); outs]
                } else {
                    vec![0.0; outs]
                };
                Dense {
                    inputs,
                    outputs: outs,
                    weights,
                    bias,
                }
            })
            .collect();
        Ok(ScaleEncoder { layers })
    }

    /// Checks layer shapes after deserialization.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig(
                "encoder needs at least one layer".into(),
            ));
        }
        for (k, l) in layers.iter().enumerate() {
            check_dim(l.inputs * l.outputs, l.weights.len())?;
            check_dim(l.outputs, l.bias.len())?;
            if k > 0 {
                check_dim(layers[k - 1].outputs, l.inputs)?;
            }
        }
        Ok(ScaleEncoder { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    /// Per-operator scales at `z`.
    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(z)?.scales)
    }

    pub(crate) fn trace(&self, z: &[f64]) -> Result<Trace> {
        check_dim(self.input_dim(), z.len())?;
        let mut activations = vec![z.to_vec()];
        let (hidden, out) = self.layers.split_at(self.layers.len() - 1);
        for layer in hidden {
            let next = layer
                .apply(activations.last().expect("non-empty"))
                .into_iter()
                .map(f64::tanh)
                .collect();
            activations.push(next);
        }
        let logits = out[0].apply(activations.last().expect("non-empty"));
        let scales = logits
            .iter()
            .map(|&o| softplus(o).max(f64::MIN_POSITIVE))
            .collect();
        Ok(Trace {
            activations,
            logits,
            scales,
        })
    }

    /// Gradient of a loss with respect to all parameters, given its gradient
    /// with respect to the scales. Layout matches [`ScaleEncoder::params`].
    pub(crate) fn backward(&self, trace: &Trace, d_scales: &[f64]) -> Vec<f64> {
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len()];
        let mut delta: Vec<f64> = d_scales
            .iter()
            .zip(&trace.logits)
            .map(|(g, &o)| g * sigmoid(o))
            .collect();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &trace.activations[k];
            let mut g = Vec::with_capacity(layer.param_count());
            for d in &delta {
                g.extend(input.iter().map(|x| d * x));
            }
            g.extend_from_slice(&delta);
            grads[k] = g;
            if k > 0 {
                // Through the weights, then through tanh (input = tanh(pre)).
                delta = (0..layer.inputs)
                    .map(|j| {
                        let back: f64 = delta
                            .iter()
                            .enumerate()
                            .map(|(i, d)| d * layer.weights[i * layer.inputs + j])
                            .sum();
                        back * (1.0 - input[j] * input[j])
                    })
                    .collect();
            }
        }
        grads.concat()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// All weights and biases, layer by layer (weights first).
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_dim(self.param_count(), params.len())?;
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights.len());
            let (b, tail) = tail.split_at(l.bias.len());
            l.weights.copy_from_slice(w);
            l.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("encoder serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ScaleEncoder = serde_json::from_str(text)?;
        Self::from_layers(raw.layers)
    }
}

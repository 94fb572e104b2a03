use rand::Rng;
use serde::{Deserialize, Serialize};

use super::param::ParamVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Transformation applied to the last affine layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    /// Raw logits; class probabilities are formed inside the loss.
    SoftmaxLogits,
    Identity,
    /// Elementwise `tanh`, range (-1, 1).
    BoundedTanh,
    /// Softmax onto the open probability simplex.
    SimplexSoftmax,
}

impl OutputHead {
    pub fn apply(self, raw: &[f64]) -> Vec<f64> {
        match self {
            OutputHead::SoftmaxLogits | OutputHead::Identity => raw.to_vec(),
            OutputHead::BoundedTanh => raw.iter().map(|v| v.tanh()).collect(),
            OutputHead::SimplexSoftmax => softmax(raw),
        }
    }

    /// Pull a gradient on the head output back onto the raw output.
    pub fn backprop(self, output: &[f64], grad_output: &[f64]) -> Vec<f64> {
        match self {
            OutputHead::SoftmaxLogits | OutputHead::Identity => grad_output.to_vec(),
            OutputHead::BoundedTanh => output
                .iter()
                .zip(grad_output)
                .map(|(y, g)| g * (1.0 - y * y))
                .collect(),
            OutputHead::SimplexSoftmax => {
                let dot: f64 = output.iter().zip(grad_output).map(|(y, g)| y * g).sum();
                output
                    .iter()
                    .zip(grad_output)
                    .map(|(y, g)| y * (g - dot))
                    .collect()
            }
        }
    }
}

/// Numerically stable softmax. Entries are floored at the smallest positive
/// normal so the result stays strictly inside the simplex.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v = (*v / sum).max(f64::MIN_POSITIVE);
    }
    out
}

/// `ln Σ exp(z)` with max subtraction.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

/// Architecture of a fully connected network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_head: OutputHead,
}

/// Per-layer activations recorded during a forward pass.
#[derive(Clone, Debug)]
pub(crate) struct Trace {
    /// `acts[0]` is the input, `acts[l]` the post-activation output of
    /// hidden layer `l`; the last entry is the raw (pre-head) output.
    pub acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn raw_output(&self) -> &[f64] {
        self.acts.last().expect("trace has at least input and output")
    }
}

impl MlpSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden_activation: Activation,
        output_head: OutputHead,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Structure(
                "an MLP needs at least input and output sizes".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Structure("layer sizes must be >= 1".into()));
        }
        Ok(Self {
            layer_sizes,
            hidden_activation,
            output_head,
        })
    }

    /// Multinomial logistic regression: one affine layer with softmax logits.
    pub fn logistic(inputs: usize, classes: usize) -> Result<Self> {
        Self::new(
            vec![inputs, classes],
            Activation::Tanh,
            OutputHead::SoftmaxLogits,
        )
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_head(&self) -> OutputHead {
        self.output_head
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut out = Vec::with_capacity(self.param_count());
        for w in self.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            out.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)));
            out.extend(std::iter::repeat_n(0.0, fan_out));
        }
        ParamVector::from(out)
    }

    pub(crate) fn check(&self, params: &[f64], input: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dim("mlp params", self.param_count(), params.len()));
        }
        if input.len() != self.input_dim() {
            return Err(Error::dim("mlp input", self.input_dim(), input.len()));
        }
        Ok(())
    }

    /// Forward pass including the output head.
    pub fn forward(&self, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.output_head.apply(&self.forward_raw(params, input)?))
    }

    /// Forward pass stopping before the output head.
    pub fn forward_raw(&self, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
        self.check(params, input)?;
        Ok(self.trace(params, input).acts.pop().unwrap())
    }

    pub(crate) fn trace(&self, params: &[f64], input: &[f64]) -> Trace {
        let layers = self.layer_sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input.to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let weights = &params[offset..offset + n_in * n_out];
            let biases = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let x = &acts[l];
            let mut z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    biases[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
                })
                .collect();
            if l + 1 < layers {
                let act = self.hidden_activation;
                z.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            acts.push(z);
        }
        Trace { acts }
    }

    /// Backpropagate `grad_raw` (gradient w.r.t. the raw output) through a
    /// recorded trace. Parameter gradients are added into `grad_params`; the
    /// gradient w.r.t. the input is written to `grad_input` when requested.
    pub(crate) fn backward(
        &self,
        params: &[f64],
        trace: &Trace,
        grad_raw: &[f64],
        grad_params: &mut [f64],
        grad_input: Option<&mut Vec<f64>>,
    ) {
        let layers = self.layer_sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for w in self.layer_sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }

        let mut delta = grad_raw.to_vec();
        let mut grad_input = grad_input;
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let base = offsets[l];
            let x = &trace.acts[l];
            for o in 0..n_out {
                let d = delta[o];
                let row = &mut grad_params[base + o * n_in..base + (o + 1) * n_in];
                for (g, v) in row.iter_mut().zip(x) {
                    *g += d * v;
                }
                grad_params[base + n_in * n_out + o] += d;
            }
            if l == 0 && grad_input.is_none() {
                break;
            }
            let weights = &params[base..base + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                for (p, w) in prev.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                    *p += w * d;
                }
            }
            if l == 0 {
                if let Some(out) = grad_input.take() {
                    *out = prev;
                }
                break;
            }
            let act = self.hidden_activation;
            for (p, y) in prev.iter_mut().zip(x) {
                *p *= act.derivative_from_output(*y);
            }
            delta = prev;
        }
    }
}

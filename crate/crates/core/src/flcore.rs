//! Client-side training, evaluation and server-side weighted aggregation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{ce_from_logits, ce_loss_and_grad, sgd_step_in_place, LabelledRow, MlpSpec, ParamVector};
use crate::rng::SimRng;

pub const DEFAULT_MINIBATCH: usize = 32;
pub const DEFAULT_PROX_MU: f64 = 0.01;

/// Hyper-parameters of one round of local training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalTrainSpec {
    pub epochs: usize,
    pub learning_rate: f64,
    #[serde(default = "default_minibatch")]
    pub minibatch_size: usize,
    /// Proximal coefficient; zero disables the proximal term.
    #[serde(default)]
    pub prox_mu: f64,
}

fn default_minibatch() -> usize {
    DEFAULT_MINIBATCH
}

impl Default for LocalTrainSpec {
    fn default() -> Self {
        Self {
            epochs: 5,
            learning_rate: 0.05,
            minibatch_size: DEFAULT_MINIBATCH,
            prox_mu: 0.0,
        }
    }
}

impl LocalTrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::config("epochs", "must be >= 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be finite and >= 0"));
        }
        if self.minibatch_size < 1 {
            return Err(Error::config("minibatch_size", "must be >= 1"));
        }
        if !(self.prox_mu >= 0.0 && self.prox_mu.is_finite()) {
            return Err(Error::config("prox_mu", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Gradient steps this spec performs on `n` training samples.
    pub fn steps_for(&self, n: usize) -> usize {
        self.epochs * n.div_ceil(self.minibatch_size)
    }
}

/// Convex aggregation weights, one per client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AggregationWeights(Vec<f64>);

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

impl AggregationWeights {
    /// Each weight must be in `(0, 1]` and the total within 1e-9 of one.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Structure("aggregation needs at least one weight".into()));
        }
        if let Some(bad) = p.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return Err(Error::Structure(format!("aggregation weight {bad} outside (0, 1]")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::Structure(format!("aggregation weights sum to {sum}")));
        }
        Ok(Self(p))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Weights proportional to per-client sample counts.
    pub fn proportional(sizes: &[usize]) -> Result<Self> {
        let total: usize = sizes.iter().sum();
        Self::new(sizes.iter().map(|&s| s as f64 / total as f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for AggregationWeights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AggregationWeights> for Vec<f64> {
    fn from(w: AggregationWeights) -> Self {
        w.0
    }
}

/// Mini-batch SGD on the client's cross-entropy for `epochs` shuffled passes.
///
/// With `prox_mu > 0` each step also pulls towards `anchor`; that term is
/// applied in closed (proximal) form, `w <- (w - lr*g + lr*mu*anchor) / (1 + lr*mu)`,
/// which stays stable for any `lr * mu`.
pub fn local_train(
    model: &MlpSpec,
    start: &ParamVector,
    train: &Dataset,
    spec: &LocalTrainSpec,
    anchor: &ParamVector,
    rng: &mut SimRng,
) -> Result<ParamVector> {
    if train.is_empty() {
        return Err(Error::Usage("local training on an empty dataset".into()));
    }
    if start.len() != model.param_count() {
        return Err(Error::dim("local_train start", model.param_count(), start.len()));
    }
    if anchor.len() != start.len() {
        return Err(Error::dim("local_train anchor", start.len(), anchor.len()));
    }
    spec.validate()?;
    let mut w = start.clone();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let lr = spec.learning_rate;
    let shrink = 1.0 + lr * spec.prox_mu;
    for _ in 0..spec.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(spec.minibatch_size) {
            let batch: Vec<LabelledRow<'_>> = chunk.iter().map(|&i| train.sample(i)).collect();
            let (_, grad) = ce_loss_and_grad(model, &w, &batch)?;
            if spec.prox_mu > 0.0 {
                for ((p, g), a) in w.iter_mut().zip(grad.iter()).zip(anchor.iter()) {
                    *p = (*p - lr * g + lr * spec.prox_mu * a) / shrink;
                }
            } else {
                sgd_step_in_place(&mut w, &grad, lr);
            }
        }
    }
    Ok(w)
}

/// Accuracy and mean cross-entropy of `params` on `data`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate(model: &MlpSpec, params: &ParamVector, data: &Dataset) -> Result<Evaluation> {
    evaluate_rows(model, params, data, 0..data.len())
}

/// Like [`evaluate`] restricted to the listed rows.
pub fn evaluate_rows(
    model: &MlpSpec,
    params: &ParamVector,
    data: &Dataset,
    rows: impl ExactSizeIterator<Item = usize>,
) -> Result<Evaluation> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Usage("evaluation on an empty dataset".into()));
    }
    let mut correct = 0usize;
    let mut loss = 0.0;
    for i in rows {
        let (x, y) = data.sample(i);
        let logits = model.forward_raw(params, x)?;
        if argmax(&logits) == y {
            correct += 1;
        }
        loss += ce_from_logits(&logits, y).0;
    }
    Ok(Evaluation {
        accuracy: correct as f64 / n as f64,
        loss: loss / n as f64,
    })
}

/// Weighted model average `W = sum_i p_i * w_i`.
///
/// Accumulated in client-index order as `w_0 + sum_i p_i (w_i - w_0)`, then
/// clamped to the coordinate-wise hull of the inputs, so identical inputs
/// reproduce themselves exactly and the result never leaves the hull.
pub fn aggregate(models: &[ParamVector], weights: &AggregationWeights) -> Result<ParamVector> {
    if models.len() != weights.len() {
        return Err(Error::dim("aggregate weights", models.len(), weights.len()));
    }
    let reference = models
        .first()
        .ok_or_else(|| Error::Structure("aggregating zero models".into()))?;
    let dim = reference.len();
    if let Some(m) = models.iter().find(|m| m.len() != dim) {
        return Err(Error::dim("aggregate model", dim, m.len()));
    }
    let mut out = reference.clone();
    for j in 0..dim {
        let base = reference[j];
        let mut acc = base;
        let (mut lo, mut hi) = (base, base);
        for (m, p) in models.iter().zip(weights.as_slice()) {
            let v = m[j];
            acc += p * (v - base);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        out[j] = acc.clamp(lo, hi);
    }
    Ok(out)
}

/// Weighted global loss `F = sum_i p_i * f_i`.
pub fn global_loss(losses: &[f64], weights: &AggregationWeights) -> Result<f64> {
    if losses.len() != weights.len() {
        return Err(Error::dim("global_loss", weights.len(), losses.len()));
    }
    Ok(losses
        .iter()
        .zip(weights.as_slice())
        .fold(0.0, |acc, (f, p)| acc + p * f))
}

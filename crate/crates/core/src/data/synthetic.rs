use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{rng_from, stream, SimRng};

/// Spread of per-client sample counts around their configured means.
pub const SIZE_LOGNORMAL_SIGMA: f64 = 0.25;

/// Federated synthetic(a, b) classification data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub num_clients: usize,
    pub dims: usize,
    pub classes: usize,
    /// Inter-client variance of the ground-truth linear models.
    #[serde(default = "one")]
    pub model_variance: f64,
    /// Inter-client variance of the feature means.
    #[serde(default = "one")]
    pub feature_variance: f64,
    pub mean_train_per_client: usize,
    pub mean_test_per_client: usize,
    pub server_test_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, bool, &str); 7] = [
            ("num_clients", self.num_clients >= 1, "must be >= 1"),
            ("dims", self.dims >= 1, "must be >= 1"),
            ("classes", self.classes >= 2, "must be >= 2"),
            ("model_variance", self.model_variance >= 0.0 && self.model_variance.is_finite(), "must be finite and >= 0"),
            ("feature_variance", self.feature_variance >= 0.0 && self.feature_variance.is_finite(), "must be finite and >= 0"),
            ("mean_train_per_client", self.mean_train_per_client >= 1 && self.mean_test_per_client >= 1, "sizes must be >= 1"),
            ("server_test_size", self.server_test_size >= 1, "must be >= 1"),
        ];
        for (key, ok, msg) in checks {
            if !ok {
                return Err(Error::config(key, msg));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClientSplit {
    pub train: Dataset,
    pub test: Dataset,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FederatedData {
    pub clients: Vec<ClientSplit>,
    pub server_test: Dataset,
}

/// Ground truth of one client: linear scorer plus Gaussian feature law.
struct ClientLaw {
    weights: Vec<f64>,
    bias: Vec<f64>,
    feature_mean: Vec<f64>,
}

fn normal(rng: &mut SimRng) -> f64 {
    StandardNormal.sample(rng)
}

impl ClientLaw {
    fn draw_into(&self, feature_std: &[f64], rng: &mut SimRng, features: &mut Vec<f64>) -> usize {
        let d = feature_std.len();
        let start = features.len();
        for (mean, std) in self.feature_mean.iter().zip(feature_std) {
            features.push(mean + std * normal(rng));
        }
        let x = &features[start..];
        let k = self.bias.len();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for c in 0..k {
            let row = &self.weights[c * d..(c + 1) * d];
            let score = self.bias[c] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            if score > best_score {
                best_score = score;
                best = c;
            }
        }
        best
    }

    fn sample(&self, n: usize, feature_std: &[f64], classes: usize, rng: &mut SimRng) -> Dataset {
        let mut features = Vec::with_capacity(n * feature_std.len());
        let labels = (0..n).map(|_| self.draw_into(feature_std, rng, &mut features)).collect();
        Dataset::new(features, labels, feature_std.len(), classes).expect("generated data is well formed")
    }
}

/// Generate per-client train/test splits and a server test set drawn from the
/// pooled mixture of all clients.
///
/// A shared scorer `(W0, b0) ~ N(0, 1)` is perturbed per client by a scalar
/// shift `u ~ N(0, a)` and elementwise noise of variance `a`; feature means
/// are a scalar `B ~ N(0, b)` plus elementwise noise of variance `b`;
/// features have diagonal covariance `j^-1.2`. With `a = b = 0` every client
/// shares one distribution.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<FederatedData> {
    cfg.validate()?;
    let (d, k) = (cfg.dims, cfg.classes);
    let feature_std: Vec<f64> = (1..=d).map(|j| (j as f64).powf(-1.2).sqrt()).collect();
    let a_std = cfg.model_variance.sqrt();
    let b_std = cfg.feature_variance.sqrt();

    let mut shared = rng_from(cfg.seed, &[stream::DATA, 0]);
    let w0: Vec<f64> = (0..k * d).map(|_| normal(&mut shared)).collect();
    let b0: Vec<f64> = (0..k).map(|_| normal(&mut shared)).collect();

    let mut laws = Vec::with_capacity(cfg.num_clients);
    let mut clients = Vec::with_capacity(cfg.num_clients);
    for c in 0..cfg.num_clients {
        let mut rng = rng_from(cfg.seed, &[stream::DATA, 1, c as u64]);
        let shift = a_std * normal(&mut rng);
        let weights = w0.iter().map(|w| w + shift + a_std * normal(&mut rng)).collect();
        let bias = b0.iter().map(|b| b + shift + a_std * normal(&mut rng)).collect();
        let centre = b_std * normal(&mut rng);
        let feature_mean = (0..d).map(|_| centre + b_std * normal(&mut rng)).collect();
        let law = ClientLaw {
            weights,
            bias,
            feature_mean,
        };
        let scale = (SIZE_LOGNORMAL_SIGMA * normal(&mut rng)).exp();
        let n_train = ((cfg.mean_train_per_client as f64 * scale).round() as usize).max(1);
        let n_test = ((cfg.mean_test_per_client as f64 * scale).round() as usize).max(1);
        let train = law.sample(n_train, &feature_std, k, &mut rng);
        let test = law.sample(n_test, &feature_std, k, &mut rng);
        clients.push(ClientSplit { train, test });
        laws.push(law);
    }

    let mut rng = rng_from(cfg.seed, &[stream::DATA, 2]);
    let mut features = Vec::with_capacity(cfg.server_test_size * d);
    let labels = (0..cfg.server_test_size)
        .map(|_| {
            let law = &laws[rng.random_range(0..laws.len())];
            law.draw_into(&feature_std, &mut rng, &mut features)
        })
        .collect();
    let server_test = Dataset::new(features, labels, d, k)?;
    Ok(FederatedData {
        clients,
        server_test,
    })
}

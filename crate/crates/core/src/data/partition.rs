use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numerics::softmax;
use crate::rng::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionScheme {
    /// Per-client class proportions drawn from `Dir(delta)`.
    DirichletLabelSkew { delta: f64 },
    /// Client sizes proportional to `exp(N(0, sigma^2))` draws.
    LognormalQuantitySkew { sigma: f64 },
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub scheme: PartitionScheme,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_train_fraction() -> f64 {
    0.7
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<()> {
        match self.scheme {
            PartitionScheme::DirichletLabelSkew { delta } if !(delta > 0.0 && delta.is_finite()) => {
                return Err(Error::config("scheme.delta", "must be finite and > 0"))
            }
            PartitionScheme::LognormalQuantitySkew { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                return Err(Error::config("scheme.sigma", "must be finite and > 0"))
            }
            _ => {}
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("train_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Split `total` into integer parts proportional to `weights`, handing the
/// leftover units to the largest fractional remainders (lowest index wins ties).
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// One draw from a symmetric Dirichlet over `k` categories. Gamma variates are
/// formed in log space (`G(a) = G(a+1) * U^(1/a)`) so tiny concentrations do
/// not underflow.
pub fn dirichlet_sample(k: usize, concentration: f64, rng: &mut SimRng) -> Vec<f64> {
    let gamma = Gamma::new(concentration + 1.0, 1.0).expect("positive shape");
    let logs: Vec<f64> = (0..k)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            g.ln() + u.ln() / concentration
        })
        .collect();
    softmax(&logs)
}

fn check_source(source: &Dataset, clients: usize) -> Result<()> {
    if clients == 0 {
        return Err(Error::Usage("partition into zero clients".into()));
    }
    if clients > source.len() {
        return Err(Error::Usage(format!(
            "{clients} clients but only {} samples",
            source.len()
        )));
    }
    Ok(())
}

/// Move single samples from the largest parts until no part is empty.
fn fill_empty(parts: &mut [Vec<usize>]) {
    while let Some(empty) = parts.iter().position(Vec::is_empty) {
        let donor = (0..parts.len())
            .max_by(|&a, &b| parts[a].len().cmp(&parts[b].len()).then(b.cmp(&a)))
            .unwrap();
        let moved = parts[donor].pop().unwrap();
        parts[empty].push(moved);
    }
}

fn materialize(source: &Dataset, mut parts: Vec<Vec<usize>>) -> Vec<Dataset> {
    fill_empty(&mut parts);
    parts
        .into_iter()
        .map(|mut idx| {
            idx.sort_unstable();
            source.select(&idx)
        })
        .collect()
}

/// Result of a label-skew partition: the client datasets and the class
/// proportions each client drew.
#[derive(Clone, Debug)]
pub struct DirichletPartition {
    pub clients: Vec<Dataset>,
    pub proportions: Vec<Vec<f64>>,
}

/// Label-skew partition. Each client draws class proportions from `Dir(delta)`;
/// every class is then dealt to clients in proportion to their draws, so each
/// sample lands with exactly one client.
pub fn partition_dirichlet(source: &Dataset, clients: usize, delta: f64, rng: &mut SimRng) -> Result<DirichletPartition> {
    check_source(source, clients)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Usage(format!("Dirichlet concentration must be > 0, got {delta}")));
    }
    let k = source.num_classes();
    let proportions: Vec<Vec<f64>> = (0..clients).map(|_| dirichlet_sample(k, delta, rng)).collect();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..source.len() {
        by_class[source.label(i)].push(i);
    }
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); clients];
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        members.shuffle(rng);
        let weights: Vec<f64> = proportions.iter().map(|p| p[class]).collect();
        let counts = largest_remainder(members.len(), &weights);
        let mut rest = members.as_slice();
        for (part, count) in parts.iter_mut().zip(counts) {
            let (take, tail) = rest.split_at(count);
            part.extend_from_slice(take);
            rest = tail;
        }
    }
    Ok(DirichletPartition {
        clients: materialize(source, parts),
        proportions,
    })
}

fn deal_sizes(source: &Dataset, sizes: &[usize], rng: &mut SimRng) -> Vec<Dataset> {
    let mut idx: Vec<usize> = (0..source.len()).collect();
    idx.shuffle(rng);
    let mut rest = idx.as_slice();
    let parts = sizes
        .iter()
        .map(|&s| {
            let (take, tail) = rest.split_at(s);
            rest = tail;
            take.to_vec()
        })
        .collect();
    materialize(source, parts)
}

/// Quantity-skew partition with lognormal relative sizes and random class mix.
pub fn partition_quantity_lognormal(source: &Dataset, clients: usize, sigma: f64, rng: &mut SimRng) -> Result<Vec<Dataset>> {
    check_source(source, clients)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Usage(format!("lognormal sigma must be > 0, got {sigma}")));
    }
    let weights: Vec<f64> = (0..clients)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (sigma * z).exp()
        })
        .collect();
    let sizes = largest_remainder(source.len(), &weights);
    Ok(deal_sizes(source, &sizes, rng))
}

pub fn partition_uniform(source: &Dataset, clients: usize, rng: &mut SimRng) -> Result<Vec<Dataset>> {
    check_source(source, clients)?;
    let sizes = largest_remainder(source.len(), &vec![1.0; clients]);
    Ok(deal_sizes(source, &sizes, rng))
}

/// Dispatch on a configured scheme.
pub fn partition(source: &Dataset, clients: usize, scheme: PartitionScheme, rng: &mut SimRng) -> Result<Vec<Dataset>> {
    match scheme {
        PartitionScheme::DirichletLabelSkew { delta } => {
            partition_dirichlet(source, clients, delta, rng).map(|p| p.clients)
        }
        PartitionScheme::LognormalQuantitySkew { sigma } => {
            partition_quantity_lognormal(source, clients, sigma, rng)
        }
        PartitionScheme::Uniform => partition_uniform(source, clients, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn balanced(n: usize, k: usize) -> Dataset {
        let features = (0..n).map(|i| i as f64).collect();
        Dataset::new(features, (0..n).map(|i| i % k).collect(), 1, k).unwrap()
    }

    #[test]
    fn largest_remainder_conserves() {
        assert_eq!(largest_remainder(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(largest_remainder(7, &[0.5, 0.25, 0.25]).iter().sum::<usize>(), 7);
        assert_eq!(largest_remainder(0, &[1.0, 2.0]), vec![0, 0]);
    }

    #[test]
    fn single_client_gets_everything() {
        let src = balanced(50, 5);
        let p = partition_dirichlet(&src, 1, 0.3, &mut rng_from(0, &[])).unwrap();
        assert_eq!(p.clients.len(), 1);
        assert_eq!(p.clients[0], src);
    }

    #[test]
    fn too_many_clients_is_usage_error() {
        let src = balanced(5, 2);
        let mut rng = rng_from(0, &[]);
        assert!(matches!(partition_dirichlet(&src, 6, 0.3, &mut rng), Err(Error::Usage(_))));
        assert!(matches!(partition_quantity_lognormal(&src, 6, 0.3, &mut rng), Err(Error::Usage(_))));
    }

    #[test]
    fn proportions_sum_to_one() {
        let mut rng = rng_from(8, &[]);
        for delta in [1e-3, 0.3, 1.0, 1000.0] {
            let p = dirichlet_sample(7, delta, &mut rng);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|v| v.is_finite() && *v > 0.0));
        }
    }

    #[test]
    fn tiny_delta_concentrates_labels() {
        let src = balanced(2000, 5);
        let p = partition_dirichlet(&src, 10, 0.05, &mut rng_from(2, &[])).unwrap();
        // Most clients should be dominated by one class.
        let dominated = p
            .clients
            .iter()
            .filter(|c| {
                let counts = c.class_counts();
                *counts.iter().max().unwrap() as f64 > 0.8 * c.len() as f64
            })
            .count();
        assert!(dominated >= 6, "{dominated}");
        assert!(p.clients.iter().all(|c| !c.is_empty()));
    }

    #[test]
    fn degenerate_lognormal_gives_equal_sizes() {
        let src = balanced(1000, 4);
        let parts = partition_quantity_lognormal(&src, 10, 1e-6, &mut rng_from(1, &[])).unwrap();
        for p in parts {
            assert!((99..=101).contains(&p.len()), "{}", p.len());
        }
    }

    #[test]
    fn invalid_config_names_key() {
        let cfg = PartitionConfig {
            scheme: PartitionScheme::DirichletLabelSkew { delta: 0.0 },
            train_fraction: 0.7,
            seed: 0,
        };
        match cfg.validate() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "scheme.delta"),
            other => panic!("{other:?}"),
        }
    }
}

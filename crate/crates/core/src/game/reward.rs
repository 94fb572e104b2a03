use crate::error::Result;
use crate::flcore::{global_loss, AggregationWeights};

/// Losses are floored here before taking reciprocals.
pub const LOSS_FLOOR: f64 = 1e-8;

/// Utility of a loss, `1 / max(loss, LOSS_FLOOR)`, before any clipping.
pub fn utility(loss: f64) -> f64 {
    1.0 / loss.max(LOSS_FLOOR)
}

/// Server reward `κ_g · min(1 / Σ p_i f_i, R_max)`.
pub fn server_reward(losses: &[f64], weights: &AggregationWeights, kappa: f64, reward_clip: f64) -> Result<f64> {
    let floored: Vec<f64> = losses.iter().map(|f| f.max(LOSS_FLOOR)).collect();
    let f = global_loss(&floored, weights)?;
    Ok(kappa * utility(f).min(reward_clip))
}

/// Client reward `κ_l · min(1 / f_i, R_max)`.
pub fn client_reward(loss: f64, kappa: f64, reward_clip: f64) -> f64 {
    kappa * utility(loss).min(reward_clip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;

    #[test]
    fn server_reward_examples() {
        let p = AggregationWeights::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(server_reward(&[2.0, 2.0], &p, 1.0, 100.0).unwrap(), 0.5);
        assert_eq!(server_reward(&[0.0, 1e-12], &p, 1.0, 100.0).unwrap(), 100.0);
        assert_eq!(server_reward(&[0.0, 0.0], &p, 3.0, 100.0).unwrap(), 300.0);
    }

    #[test]
    fn server_reward_matches_recomputation() {
        let mut rng = rng_from(2, &[]);
        for _ in 0..200 {
            let n = rng.random_range(1..8);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let p = AggregationWeights::new(raw.iter().map(|v| v / s).collect()).unwrap();
            let f: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..4.0)).collect();
            let dot: f64 = p.as_slice().iter().zip(&f).map(|(a, b)| a * b).sum();
            let r = server_reward(&f, &p, 1.0, 100.0).unwrap();
            assert!((r - 1.0 / dot).abs() < 1e-12);
        }
    }

    #[test]
    fn client_reward_examples() {
        assert_eq!(client_reward(4.0, 1.0, 100.0), 0.25);
        assert_eq!(client_reward(2.0, 10.0, 100.0), 5.0);
        assert_eq!(client_reward(0.0, 1.0, 100.0), 100.0);
    }

    #[test]
    fn client_reward_is_monotone_and_bounded() {
        let mut rng = rng_from(3, &[]);
        for _ in 0..100 {
            let a: f64 = rng.random_range(0.0..5.0);
            let b: f64 = rng.random_range(0.0..5.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (r_lo, r_hi) = (client_reward(lo, 2.0, 100.0), client_reward(hi, 2.0, 100.0));
            assert!(r_lo >= r_hi);
            assert!(r_hi > 0.0 && r_lo <= 200.0);
        }
    }
}

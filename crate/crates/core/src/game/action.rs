use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flcore::AggregationWeights;
use crate::numerics::softmax;

/// Feasible ranges of a client's local epochs and learning rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionBounds {
    pub alpha: [usize; 2],
    pub eta: [f64; 2],
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            alpha: [1, 10],
            eta: [1e-4, 0.5],
        }
    }
}

impl ActionBounds {
    pub fn validate(&self) -> Result<()> {
        let [a_min, a_max] = self.alpha;
        if a_min < 1 || a_min > a_max {
            return Err(Error::config("alpha", format!("need 1 <= min <= max, got [{a_min}, {a_max}]")));
        }
        let [e_min, e_max] = self.eta;
        if !(e_min > 0.0 && e_min <= e_max && e_max.is_finite()) {
            return Err(Error::config("eta", format!("need 0 < min <= max, got [{e_min}, {e_max}]")));
        }
        Ok(())
    }

    pub fn contains(&self, alpha: usize, eta: f64) -> bool {
        (self.alpha[0]..=self.alpha[1]).contains(&alpha) && eta >= self.eta[0] && eta <= self.eta[1]
    }
}

/// Softmax the server actor's raw outputs onto the simplex.
pub fn server_action_to_weights(raw: &[f64]) -> Result<AggregationWeights> {
    AggregationWeights::new(softmax(raw))
}

/// Decode a client action already squashed into `[-1, 1]^2`.
///
/// Epochs map linearly and round to nearest with ties towards the lower
/// bound; the learning rate maps log-linearly between its bounds.
pub fn client_action_from_unit(unit: &[f64], bounds: &ActionBounds) -> Result<(usize, f64)> {
    if unit.len() != 2 {
        return Err(Error::dim("client action", 2, unit.len()));
    }
    let frac = |u: f64| ((u.clamp(-1.0, 1.0) + 1.0) / 2.0).clamp(0.0, 1.0);
    let [a_min, a_max] = bounds.alpha;
    let x = a_min as f64 + frac(unit[0]) * (a_max - a_min) as f64;
    let floor = x.floor();
    let alpha = if x - floor > 0.5 { floor + 1.0 } else { floor };
    let alpha = (alpha as usize).clamp(a_min, a_max);

    let [e_min, e_max] = bounds.eta;
    let f = frac(unit[1]);
    let eta = if f >= 1.0 {
        e_max
    } else if f <= 0.0 {
        e_min
    } else {
        (e_min.ln() + f * (e_max.ln() - e_min.ln())).exp().clamp(e_min, e_max)
    };
    Ok((alpha, eta))
}

/// Squash raw actor outputs with `tanh`, then decode as above.
pub fn client_action_decode(raw: &[f64], bounds: &ActionBounds) -> Result<(usize, f64)> {
    let unit: Vec<f64> = raw.iter().map(|z| z.tanh()).collect();
    client_action_from_unit(&unit, bounds)
}

/// Inverse of [`client_action_from_unit`] for a fixed `(α, η)`: the unit
/// point that decodes to it.
pub fn client_unit_for(alpha: usize, eta: f64, bounds: &ActionBounds) -> [f64; 2] {
    let [a_min, a_max] = bounds.alpha;
    let fa = if a_max == a_min { 0.5 } else { (alpha - a_min) as f64 / (a_max - a_min) as f64 };
    let [e_min, e_max] = bounds.eta;
    let fe = if e_max == e_min { 0.5 } else { (eta.ln() - e_min.ln()) / (e_max.ln() - e_min.ln()) };
    [2.0 * fa - 1.0, 2.0 * fe - 1.0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;

    #[test]
    fn equal_raw_gives_uniform_weights() {
        let w = server_action_to_weights(&[0.7; 4]).unwrap();
        assert!(w.as_slice().iter().all(|p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn analytic_two_way_softmax() {
        let w = server_action_to_weights(&[2f64.ln(), 0.0]).unwrap();
        assert!((w.as_slice()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w.as_slice()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weights_always_valid_and_shift_invariant() {
        let mut rng = rng_from(1, &[]);
        for _ in 0..1000 {
            let n = rng.random_range(1..12);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-30.0..30.0)).collect();
            let w = server_action_to_weights(&raw).unwrap();
            let shifted: Vec<f64> = raw.iter().map(|v| v + 5.5).collect();
            let w2 = server_action_to_weights(&shifted).unwrap();
            for (a, b) in w.as_slice().iter().zip(w2.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn centre_of_box() {
        let b = ActionBounds::default();
        let (alpha, eta) = client_action_decode(&[0.0, 0.0], &b).unwrap();
        assert_eq!(alpha, 5);
        assert!((eta - (1e-4f64 * 0.5).sqrt()).abs() < 1e-15);
        let odd = ActionBounds { alpha: [1, 9], eta: [0.01, 1.0] };
        assert_eq!(client_action_decode(&[0.0, 0.0], &odd).unwrap().0, 5);
    }

    #[test]
    fn saturation_hits_upper_bounds() {
        let b = ActionBounds::default();
        assert_eq!(client_action_decode(&[20.0, 20.0], &b).unwrap(), (10, 0.5));
        assert_eq!(client_action_decode(&[-20.0, -20.0], &b).unwrap(), (1, 1e-4));
    }

    #[test]
    fn decode_stays_in_bounds_and_is_monotone() {
        let b = ActionBounds::default();
        let mut rng = rng_from(4, &[]);
        for _ in 0..1000 {
            let raw = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let (a, e) = client_action_decode(&raw, &b).unwrap();
            assert!(b.contains(a, e));
        }
        let grid: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.1).collect();
        for w in grid.windows(2) {
            let (a0, e0) = client_action_decode(&[w[0], w[0]], &b).unwrap();
            let (a1, e1) = client_action_decode(&[w[1], w[1]], &b).unwrap();
            assert!(a1 >= a0 && e1 >= e0);
        }
    }

    #[test]
    fn unit_inverse_round_trips() {
        let b = ActionBounds::default();
        for (alpha, eta) in [(5, 0.05), (1, 1e-4), (10, 0.5), (3, 0.01)] {
            let u = client_unit_for(alpha, eta, &b);
            let (a, e) = client_action_from_unit(&u, &b).unwrap();
            assert_eq!(a, alpha);
            assert!((e - eta).abs() < 1e-12 * eta.max(1.0));
        }
    }

    #[test]
    fn invalid_bounds_name_key() {
        let b = ActionBounds { alpha: [5, 2], ..Default::default() };
        match b.validate() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "alpha"),
            other => panic!("{other:?}"),
        }
    }
}

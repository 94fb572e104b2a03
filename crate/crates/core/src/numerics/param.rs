use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat parameter vector of a network (FL model or actor/critic).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

/// Gradient of a scalar objective with respect to a [`ParamVector`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient(Vec<f64>);

macro_rules! flat_vector {
    ($ty:ident) => {
        impl $ty {
            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }

            pub fn norm(&self) -> f64 {
                self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
            }
        }

        impl From<Vec<f64>> for $ty {
            fn from(values: Vec<f64>) -> Self {
                Self(values)
            }
        }

        impl Deref for $ty {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $ty {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }
    };
}

flat_vector!(ParamVector);
flat_vector!(Gradient);

impl Gradient {
    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradient, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(other.iter()) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().for_each(|v| *v *= factor);
    }
}

impl ParamVector {
    /// Max absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0`.
    pub fn bit_eq(&self, other: &ParamVector) -> bool {
        self.len() == other.len()
            && self
                .0
                .iter()
                .zip(other.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// One plain gradient-descent step: `params - lr * grad`.
pub fn sgd_step(params: &ParamVector, grad: &Gradient, lr: f64) -> Result<ParamVector> {
    if params.len() != grad.len() {
        return Err(Error::dim("sgd_step", params.len(), grad.len()));
    }
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(Error::Usage(format!("learning rate must be finite and >= 0, got {lr}")));
    }
    let mut out = params.clone();
    sgd_step_in_place(&mut out, grad, lr);
    Ok(out)
}

pub(crate) fn sgd_step_in_place(params: &mut [f64], grad: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let p = ParamVector::from(vec![1.0, -2.0, 3.5]);
        let out = sgd_step(&p, &Gradient::zeros(3), 0.3).unwrap();
        assert!(out.bit_eq(&p));
    }

    #[test]
    fn worked_step() {
        let p = ParamVector::from(vec![1.0, 1.0]);
        let g = Gradient::from(vec![1.0, -1.0]);
        assert_eq!(*sgd_step(&p, &g, 0.5).unwrap(), [0.5, 1.5]);
    }

    #[test]
    fn sequential_steps_are_linear() {
        let p = ParamVector::from(vec![0.25, -4.0]);
        let g = Gradient::from(vec![0.5, 2.0]);
        let two = sgd_step(&sgd_step(&p, &g, 0.25).unwrap(), &g, 0.5).unwrap();
        let one = sgd_step(&p, &g, 0.75).unwrap();
        assert!(two.max_abs_diff(&one) < 1e-15);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = ParamVector::zeros(3);
        assert!(matches!(
            sgd_step(&p, &Gradient::zeros(2), 0.1),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn deterministic_bits() {
        let p = ParamVector::from(vec![0.1, 0.2, 0.3]);
        let g = Gradient::from(vec![0.7, -0.11, 1e-3]);
        let a = sgd_step(&p, &g, 0.013).unwrap();
        let b = sgd_step(&p, &g, 0.013).unwrap();
        assert!(a.bit_eq(&b));
    }
}

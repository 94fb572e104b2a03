use super::mlp::{log_sum_exp, MlpSpec, OutputHead};
use super::param::{Gradient, ParamVector};
use crate::error::{Error, Result};

/// One labelled sample borrowed from a dataset.
pub type LabelledRow<'a> = (&'a [f64], usize);

fn check_ce_head(spec: &MlpSpec) -> Result<()> {
    match spec.output_head() {
        OutputHead::SoftmaxLogits | OutputHead::Identity => Ok(()),
        other => Err(Error::Usage(format!(
            "cross-entropy needs a logits head, got {other:?}"
        ))),
    }
}

/// Cross-entropy of one sample given raw logits, plus `dL/dlogits`.
pub(crate) fn ce_from_logits(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let lse = log_sum_exp(logits);
    let loss = lse - logits[label];
    let mut grad: Vec<f64> = logits.iter().map(|z| (z - lse).exp()).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

/// Mean cross-entropy over a batch and its gradient.
pub fn ce_loss_and_grad(
    spec: &MlpSpec,
    params: &ParamVector,
    batch: &[LabelledRow<'_>],
) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::Usage("cross-entropy over an empty batch".into()));
    }
    check_ce_head(spec)?;
    let classes = spec.output_dim();
    let mut grad = Gradient::zeros(spec.param_count());
    let mut total = 0.0;
    for &(x, y) in batch {
        spec.check(params, x)?;
        if y >= classes {
            return Err(Error::Usage(format!(
                "label {y} out of range for {classes} classes"
            )));
        }
        let trace = spec.trace(params, x);
        let (loss, g_logits) = ce_from_logits(trace.raw_output(), y);
        total += loss;
        spec.backward(params, &trace, &g_logits, &mut grad, None);
    }
    let n = batch.len() as f64;
    grad.scale(1.0 / n);
    Ok((total / n, grad))
}

/// Mean squared error (averaged over samples and outputs) on the headed
/// network output, and its gradient.
pub fn mse_loss_and_grad(
    spec: &MlpSpec,
    params: &ParamVector,
    inputs: &[&[f64]],
    targets: &[&[f64]],
) -> Result<(f64, Gradient)> {
    if inputs.is_empty() {
        return Err(Error::Usage("squared error over an empty batch".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::dim("mse targets", inputs.len(), targets.len()));
    }
    let outputs = spec.output_dim();
    let mut grad = Gradient::zeros(spec.param_count());
    let mut total = 0.0;
    let denom = (inputs.len() * outputs) as f64;
    for (x, t) in inputs.iter().zip(targets) {
        spec.check(params, x)?;
        if t.len() != outputs {
            return Err(Error::dim("mse target width", outputs, t.len()));
        }
        let trace = spec.trace(params, x);
        let out = spec.output_head().apply(trace.raw_output());
        let mut g_out = Vec::with_capacity(outputs);
        for (o, target) in out.iter().zip(t.iter()) {
            let diff = o - target;
            total += diff * diff;
            g_out.push(2.0 * diff / denom);
        }
        let g_raw = spec.output_head().backprop(&out, &g_out);
        spec.backward(params, &trace, &g_raw, &mut grad, None);
    }
    Ok((total / denom, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::mlp::Activation;
    use crate::numerics::grad_check;
    use crate::rng::rng_from;
    use rand::Rng;

    #[test]
    fn uniform_prediction_costs_ln_k() {
        let spec = MlpSpec::logistic(3, 5).unwrap();
        let params = ParamVector::zeros(spec.param_count());
        let x = [0.3, -1.0, 2.0];
        let (loss, _) = ce_loss_and_grad(&spec, &params, &[(&x, 2)]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_costs_nothing() {
        let spec = MlpSpec::logistic(1, 3).unwrap();
        // Bias on class 1 forced large.
        let params = ParamVector::from(vec![0.0, 0.0, 0.0, -50.0, 50.0, -50.0]);
        let (loss, _) = ce_loss_and_grad(&spec, &params, &[(&[1.0], 1)]).unwrap();
        assert!((0.0..1e-20).contains(&loss));
    }

    #[test]
    fn empty_batch_is_usage_error() {
        let spec = MlpSpec::logistic(2, 2).unwrap();
        let params = ParamVector::zeros(spec.param_count());
        assert!(matches!(
            ce_loss_and_grad(&spec, &params, &[]),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            mse_loss_and_grad(&spec, &params, &[], &[]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn label_out_of_range() {
        let spec = MlpSpec::logistic(1, 2).unwrap();
        let params = ParamVector::zeros(spec.param_count());
        assert!(ce_loss_and_grad(&spec, &params, &[(&[1.0], 2)]).is_err());
    }

    #[test]
    fn ce_gradient_matches_finite_differences() {
        let spec = MlpSpec::new(vec![4, 6, 3], Activation::Tanh, OutputHead::SoftmaxLogits).unwrap();
        let mut rng = rng_from(11, &[]);
        let params = spec.init_params(&mut rng);
        let xs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let batch: Vec<LabelledRow<'_>> = xs.iter().zip([0, 2, 1]).map(|(x, y)| (x.as_slice(), y)).collect();
        let err = grad_check(&params, |p| ce_loss_and_grad(&spec, p, &batch).unwrap());
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn mse_exact_fit_has_zero_loss_and_grad() {
        let spec = MlpSpec::new(vec![1, 1], Activation::Tanh, OutputHead::Identity).unwrap();
        let params = ParamVector::from(vec![2.0, 1.0]);
        let (loss, grad) = mse_loss_and_grad(&spec, &params, &[&[1.0]], &[&[3.0]]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn mse_scalar_arithmetic() {
        let spec = MlpSpec::new(vec![1, 1], Activation::Tanh, OutputHead::Identity).unwrap();
        let params = ParamVector::from(vec![0.0, 2.0]);
        let (loss, _) = mse_loss_and_grad(&spec, &params, &[&[5.0]], &[&[3.0]]).unwrap();
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let spec = MlpSpec::new(vec![3, 5, 5, 2], Activation::Tanh, OutputHead::BoundedTanh).unwrap();
        let mut rng = rng_from(5, &[]);
        let params = spec.init_params(&mut rng);
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ts: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let inputs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let targets: Vec<&[f64]> = ts.iter().map(Vec::as_slice).collect();
        let err = grad_check(&params, |p| mse_loss_and_grad(&spec, p, &inputs, &targets).unwrap());
        assert!(err < 1e-5, "{err}");
    }
}

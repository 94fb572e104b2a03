use super::param::{Gradient, ParamVector};

/// Central-difference step used by [`grad_check`].
pub const FD_STEP: f64 = 1e-6;

/// Central finite-difference gradient of `f` at `params`.
pub fn finite_difference<F>(params: &ParamVector, step: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&ParamVector) -> f64,
{
    let mut probe = params.clone();
    (0..params.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let plus = f(&probe);
            probe[i] = orig - step;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// Largest per-parameter discrepancy between the analytic gradient returned
/// by `loss_fn` and a central difference, scaled by `max(1, |numeric|)`.
pub fn grad_check<F>(params: &ParamVector, mut loss_fn: F) -> f64
where
    F: FnMut(&ParamVector) -> (f64, Gradient),
{
    let (_, analytic) = loss_fn(params);
    let numeric = finite_difference(params, FD_STEP, |p| loss_fn(p).0);
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / n.abs().max(1.0))
        .fold(0.0, f64::max)
}

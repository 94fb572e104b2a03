use super::RoundRecord;

fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    hi - lo
}

/// Whether the `window` rounds ending at index `end` (inclusive) have both
/// series within `tolerance` of flat.
pub fn window_settled(global: &[f64], local: &[f64], end: usize, window: usize, tolerance: f64) -> bool {
    if window == 0 || end + 1 < window {
        return false;
    }
    let start = end + 1 - window;
    spread(&global[start..=end]) <= tolerance && spread(&local[start..=end]) <= tolerance
}

/// First 1-based round `t >= window` whose trailing window has both global
/// and mean local accuracy varying by at most `tolerance`.
pub fn detect_equilibrium_series(global: &[f64], local: &[f64], window: usize, tolerance: f64) -> Option<usize> {
    let n = global.len().min(local.len());
    (0..n)
        .find(|&end| window_settled(global, local, end, window, tolerance))
        .map(|end| end + 1)
}

/// [`detect_equilibrium_series`] over a round history, reported as the round's `t`.
pub fn detect_equilibrium(history: &[RoundRecord], window: usize, tolerance: f64) -> Option<usize> {
    let global: Vec<f64> = history.iter().map(|r| r.global_acc).collect();
    let local: Vec<f64> = history.iter().map(|r| r.mean_local_acc).collect();
    detect_equilibrium_series(&global, &local, window, tolerance).map(|round| history[round - 1].t)
}

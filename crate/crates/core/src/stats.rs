//! Small descriptive-statistics helpers shared across modules.

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Quantile of an ascending slice using the midpoint rule: the average of the
/// order statistics at `floor(h)` and `ceil(h)`, with `h = (n - 1) q`.
pub fn quantile_midpoint(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    (sorted[h.floor() as usize] + sorted[h.ceil() as usize]) / 2.0
}

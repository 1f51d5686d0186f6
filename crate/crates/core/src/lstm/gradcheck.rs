use super::network::{LstmNetwork, OUTPUT_SIZE};
use super::train::loss_and_gradient;
use crate::error::Result;
use crate::rng::SeededRng;

pub const FD_STEP: f64 = 1e-5;
pub const MIN_SAMPLES: usize = 50;

#[derive(Debug, Clone)]
pub struct GradientCheck {
    /// `max |g_a - g_n| / max(1e-8, |g_a| + |g_n|)` over the sampled parameters.
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    /// `(flat parameter index, analytic, numeric)` per sample.
    pub samples: Vec<(usize, f64, f64)>,
}

/// Compares the backpropagated gradient of the single-window loss (dropout
/// off) with central finite differences on `n_samples` distinct parameters
/// drawn from `seed`.
pub fn gradient_check(
    net: &LstmNetwork,
    sequence: &[f64],
    target: [f64; OUTPUT_SIZE],
    n_samples: usize,
    seed: u64,
) -> Result<GradientCheck> {
    let sequences = vec![sequence.to_vec()];
    let targets = vec![target];
    let (_, grads) = loss_and_gradient(net, &sequences, &targets, None)?;
    let analytic = grads.flat_params();

    let total = net.param_count();
    let mut rng = SeededRng::new(seed);
    let mut indices: Vec<usize> = Vec::new();
    let wanted = n_samples.max(MIN_SAMPLES).min(total);
    while indices.len() < wanted {
        let k = rng.index(total);
        if !indices.contains(&k) {
            indices.push(k);
        }
    }

    let mut probe = net.clone();
    let mut check = GradientCheck {
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        samples: Vec::with_capacity(indices.len()),
    };
    for k in indices {
        let original = *probe.param_mut(k);
        *probe.param_mut(k) = original + FD_STEP;
        let plus = loss_and_gradient(&probe, &sequences, &targets, None)?.0;
        *probe.param_mut(k) = original - FD_STEP;
        let minus = loss_and_gradient(&probe, &sequences, &targets, None)?.0;
        *probe.param_mut(k) = original;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let a = analytic[k];
        let abs = (a - numeric).abs();
        let rel = abs / (a.abs() + numeric.abs()).max(1e-8);
        check.max_absolute_error = check.max_absolute_error.max(abs);
        check.max_relative_error = check.max_relative_error.max(rel);
        check.samples.push((k, a, numeric));
    }
    Ok(check)
}

use nalgebra::{DMatrix, DVector};

use super::{check_shapes, least_squares, LinearFit, ModelTag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberConfig {
    /// Residual magnitude (in target units) where the loss turns linear.
    pub delta: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for HuberConfig {
    fn default() -> Self {
        Self {
            delta: 1.35,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

impl HuberConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig("huber delta must be positive".into()));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("huber max_iter and tol must be positive".into()));
        }
        Ok(())
    }
}

/// Quadratic for `|r| <= delta`, linear with matching slope beyond.
pub fn huber_loss(residual: f64, delta: f64) -> f64 {
    let a = residual.abs();
    if a <= delta {
        0.5 * residual * residual
    } else {
        delta * (a - 0.5 * delta)
    }
}

pub(crate) struct HuberChannel {
    pub beta: DVector<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Total loss at the OLS start and after every reweighting step.
    #[cfg_attr(not(test), allow(dead_code))]
    pub losses: Vec<f64>,
}

fn total_loss(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, b0: f64, delta: f64) -> f64 {
    let r = y - x * beta;
    r.iter().map(|ri| huber_loss(ri - b0, delta)).sum()
}

pub(crate) fn huber_channel(x: &DMatrix<f64>, y: &DVector<f64>, config: &HuberConfig) -> Result<HuberChannel> {
    let (mut beta, mut b0) = least_squares(x, y, true)?;
    let mut losses = vec![total_loss(x, y, &beta, b0, config.delta)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        iterations += 1;
        let residuals = y - x * &beta;
        let sqrt_w: Vec<f64> = residuals
            .iter()
            .map(|r| {
                let a = (r - b0).abs();
                if a <= config.delta { 1.0 } else { (config.delta / a).sqrt() }
            })
            .collect();
        let design = DMatrix::from_fn(x.nrows(), x.ncols() + 1, |i, j| {
            if j == 0 { sqrt_w[i] } else { sqrt_w[i] * x[(i, j - 1)] }
        });
        let wy = DVector::from_fn(y.len(), |i, _| sqrt_w[i] * y[i]);
        let (sol, _) = least_squares(&design, &wy, false).map_err(|e| match e {
            Error::SingularDesign { column } if column > 0 => Error::SingularDesign { column: column - 1 },
            other => other,
        })?;
        let new_b0 = sol[0];
        let new_beta = sol.rows(1, x.ncols()).into_owned();
        let change = (&new_beta - &beta)
            .iter()
            .map(|d| d.abs())
            .fold((new_b0 - b0).abs(), f64::max);
        beta = new_beta;
        b0 = new_b0;
        losses.push(total_loss(x, y, &beta, b0, config.delta));
        if change < config.tol {
            converged = true;
            break;
        }
    }
    Ok(HuberChannel {
        beta,
        intercept: b0,
        iterations,
        converged,
        losses,
    })
}

/// Huber regression by iteratively reweighted least squares, started from
/// the OLS solution. Non-convergence is reported through `converged`.
pub fn fit_huber(inputs: &DMatrix<f64>, targets: &DMatrix<f64>, config: &HuberConfig) -> Result<LinearFit> {
    config.validate()?;
    check_shapes(inputs, targets)?;
    let mut fit = LinearFit {
        tag: ModelTag::Huber,
        coefficients: Vec::new(),
        intercepts: Vec::new(),
        support: None,
        iterations: Vec::new(),
        converged: true,
    };
    for y in targets.column_iter() {
        let ch = huber_channel(inputs, &y.into_owned(), config)?;
        fit.coefficients.push(ch.beta.iter().copied().collect());
        fit.intercepts.push(ch.intercept);
        fit.iterations.push(ch.iterations);
        fit.converged &= ch.converged;
    }
    Ok(fit)
}

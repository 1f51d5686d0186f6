use nalgebra::{DMatrix, DVector};

use super::{check_shapes, LinearFit, ModelTag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConfig {
    /// L1 weight, applied on the standardized column scale.
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            max_iter: 10_000,
            tol: 1e-8,
        }
    }
}

impl LassoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lasso lambda must be non-negative".into()));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("lasso max_iter and tol must be positive".into()));
        }
        Ok(())
    }
}

/// `sign(z) * max(|z| - t, 0)`.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub(crate) struct LassoChannel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective `(1/2n)|r|^2 + lambda |alpha|_1` (standardized scale) after each sweep.
    #[cfg_attr(not(test), allow(dead_code))]
    pub objective: Vec<f64>,
}

/// Cyclic coordinate descent on standardized columns with a centered target.
/// Constant columns carry no information and keep a zero coefficient.
pub(crate) fn lasso_channel(x: &DMatrix<f64>, y: &DVector<f64>, config: &LassoConfig) -> LassoChannel {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let scales: Vec<f64> = x
        .column_iter()
        .zip(&means)
        .map(|(c, m)| (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    let active: Vec<usize> = (0..p).filter(|&j| scales[j] > 0.0).collect();
    let z = DMatrix::from_fn(x.nrows(), p, |i, j| {
        if scales[j] > 0.0 { (x[(i, j)] - means[j]) / scales[j] } else { 0.0 }
    });
    let y_mean = y.mean();
    let mut residual = y.map(|v| v - y_mean);
    let mut alpha = vec![0.0; p];
    let mut objective = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < config.max_iter {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for &j in &active {
            let col = z.column(j);
            // (1/n)|z_j|^2 = 1 after standardization
            let rho = col.dot(&residual) / n + alpha[j];
            let updated = soft_threshold(rho, config.lambda);
            let delta = updated - alpha[j];
            if delta != 0.0 {
                residual.axpy(-delta, &col, 1.0);
                alpha[j] = updated;
            }
            max_change = max_change.max(delta.abs());
        }
        let l1: f64 = alpha.iter().map(|a| a.abs()).sum();
        objective.push(residual.norm_squared() / (2.0 * n) + config.lambda * l1);
        if max_change < config.tol {
            converged = true;
            break;
        }
    }
    let coefficients: Vec<f64> = (0..p)
        .map(|j| if scales[j] > 0.0 { alpha[j] / scales[j] } else { 0.0 })
        .collect();
    let intercept = y_mean - coefficients.iter().zip(&means).map(|(c, m)| c * m).sum::<f64>();
    LassoChannel {
        coefficients,
        intercept,
        sweeps,
        converged,
        objective,
    }
}

/// L1-penalized least squares with an unpenalized intercept.
pub fn fit_lasso(inputs: &DMatrix<f64>, targets: &DMatrix<f64>, config: &LassoConfig) -> Result<LinearFit> {
    config.validate()?;
    check_shapes(inputs, targets)?;
    let mut fit = LinearFit {
        tag: ModelTag::Lasso,
        coefficients: Vec::new(),
        intercepts: Vec::new(),
        support: None,
        iterations: Vec::new(),
        converged: true,
    };
    for y in targets.column_iter() {
        let ch = lasso_channel(inputs, &y.into_owned(), config);
        fit.coefficients.push(ch.coefficients);
        fit.intercepts.push(ch.intercept);
        fit.iterations.push(ch.sweeps);
        fit.converged &= ch.converged;
    }
    Ok(fit)
}

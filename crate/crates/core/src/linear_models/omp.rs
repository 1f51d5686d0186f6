use nalgebra::{DMatrix, DVector};

use super::{check_shapes, least_squares, LinearFit, ModelTag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmpConfig {
    /// Maximum number of selected columns (k).
    pub max_predictors: usize,
    /// Stop once the residual norm falls to this level.
    pub residual_tol: f64,
}

impl Default for OmpConfig {
    fn default() -> Self {
        Self {
            max_predictors: 3,
            residual_tol: 1e-9,
        }
    }
}

impl OmpConfig {
    pub fn validate(&self, columns: usize) -> Result<()> {
        if self.max_predictors == 0 || self.max_predictors > columns {
            return Err(Error::InvalidConfig(format!(
                "omp max_predictors must be in [1, {columns}], got {}",
                self.max_predictors
            )));
        }
        if !(self.residual_tol >= 0.0) {
            return Err(Error::InvalidConfig("omp residual_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Greedy selection trace for one target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpPath {
    /// Column indices in the order they were selected.
    pub support: Vec<usize>,
    /// Least-squares coefficients on the full column range, zero off-support.
    pub coefficients: Vec<f64>,
    /// Residual after each selection step; `residuals[0]` is the target itself.
    pub residuals: Vec<DVector<f64>>,
}

/// Orthogonal matching pursuit on `y ~ X beta` without intercept.
///
/// Each step picks the unselected column with the largest absolute
/// correlation against the current residual (columns normalized to unit
/// norm, lowest index on ties), refits least squares on the selected set and
/// takes the residual as the projection complement.
pub fn omp_path(x: &DMatrix<f64>, y: &DVector<f64>, config: &OmpConfig) -> Result<OmpPath> {
    config.validate(x.ncols())?;
    if x.nrows() != y.len() {
        return Err(Error::Shape {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let mut support: Vec<usize> = Vec::new();
    let mut beta = DVector::zeros(0);
    let mut residual = y.clone();
    let mut residuals = vec![residual.clone()];
    while support.len() < config.max_predictors && residual.norm() > config.residual_tol {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..x.ncols() {
            if support.contains(&j) || norms[j] == 0.0 {
                continue;
            }
            let corr = (x.column(j).dot(&residual) / norms[j]).abs();
            if best.is_none_or(|(_, c)| corr > c) {
                best = Some((j, corr));
            }
        }
        let Some((j, corr)) = best else { break };
        // residual already orthogonal to every remaining column
        if corr <= 1e-12 * residual.norm() {
            break;
        }
        support.push(j);
        let selected = x.select_columns(&support);
        beta = least_squares(&selected, y, false)?.0;
        residual = y - &selected * &beta;
        residuals.push(residual.clone());
    }
    let mut coefficients = vec![0.0; x.ncols()];
    for (k, &j) in support.iter().enumerate() {
        coefficients[j] = beta[k];
    }
    Ok(OmpPath {
        support,
        coefficients,
        residuals,
    })
}

/// OMP with intercept: columns and targets are centered before selection and
/// the intercept is recovered from the means.
pub fn fit_omp(inputs: &DMatrix<f64>, targets: &DMatrix<f64>, config: &OmpConfig) -> Result<LinearFit> {
    config.validate(inputs.ncols())?;
    check_shapes(inputs, targets)?;
    let means: Vec<f64> = inputs.column_iter().map(|c| c.mean()).collect();
    let centered = DMatrix::from_fn(inputs.nrows(), inputs.ncols(), |i, j| inputs[(i, j)] - means[j]);
    let mut fit = LinearFit {
        tag: ModelTag::Omp,
        coefficients: Vec::new(),
        intercepts: Vec::new(),
        support: Some(Vec::new()),
        iterations: Vec::new(),
        converged: true,
    };
    for y in targets.column_iter() {
        let y_mean = y.mean();
        let yc = y.map(|v| v - y_mean);
        let path = omp_path(&centered, &yc, config)?;
        let intercept = y_mean - path.coefficients.iter().zip(&means).map(|(c, m)| c * m).sum::<f64>();
        fit.iterations.push(path.support.len());
        fit.coefficients.push(path.coefficients);
        fit.intercepts.push(intercept);
        if let Some(s) = fit.support.as_mut() {
            s.push(path.support);
        }
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn orthonormal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = SeededRng::new(seed);
        let a = DMatrix::from_fn(rows, cols, |_, _| rng.standard_normal());
        a.qr().q()
    }

    #[test]
    fn one_step_exact_recovery() {
        let q = orthonormal(20, 6, 1);
        let y = q.column(3) * 2.0;
        let path = omp_path(&q, &y, &OmpConfig { max_predictors: 1, residual_tol: 0.0 }).unwrap();
        assert_eq!(path.support, vec![3]);
        assert!((path.coefficients[3] - 2.0).abs() < 1e-12);

        let targets = DMatrix::from_columns(&[y]);
        let fit = fit_omp(&q, &targets, &OmpConfig { max_predictors: 1, residual_tol: 0.0 }).unwrap();
        assert_eq!(fit.support.as_ref().unwrap()[0], vec![3]);
        assert!((fit.coefficients[0][3] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn residual_orthogonal_to_selection_and_shrinking() {
        let mut rng = SeededRng::new(17);
        let x = DMatrix::from_fn(30, 8, |_, _| rng.standard_normal());
        let y = DVector::from_fn(30, |_, _| rng.standard_normal());
        let path = omp_path(&x, &y, &OmpConfig { max_predictors: 8, residual_tol: 0.0 }).unwrap();
        assert_eq!(path.support.len(), 8);
        let mut sorted = path.support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 8);
        for (step, r) in path.residuals.iter().enumerate().skip(1) {
            for &j in &path.support[..step] {
                assert!(x.column(j).dot(r).abs() <= 1e-8);
            }
        }
        for w in path.residuals.windows(2) {
            assert!(w[1].norm() <= w[0].norm());
        }
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        let y = DVector::from_row_slice(&[1.0, 0.0, 1.0]);
        let path = omp_path(&x, &y, &OmpConfig { max_predictors: 1, residual_tol: 0.0 }).unwrap();
        assert_eq!(path.support, vec![0]);
    }

    #[test]
    fn stops_on_small_residual() {
        let q = orthonormal(10, 4, 2);
        let y = q.column(1) * 5.0;
        let path = omp_path(&q, &y, &OmpConfig { max_predictors: 4, residual_tol: 1e-9 }).unwrap();
        assert_eq!(path.support, vec![1]);
    }

    #[test]
    fn k_must_fit_columns() {
        let x = DMatrix::zeros(5, 2);
        let y = DMatrix::zeros(5, 1);
        assert!(fit_omp(&x, &y, &OmpConfig { max_predictors: 3, residual_tol: 0.0 }).is_err());
        assert!(fit_omp(&x, &y, &OmpConfig { max_predictors: 0, residual_tol: 0.0 }).is_err());
    }

    #[test]
    fn constant_columns_are_never_selected() {
        let mut rng = SeededRng::new(8);
        let x = DMatrix::from_fn(20, 3, |_, j| if j == 1 { 5.0 } else { rng.standard_normal() });
        let y = DMatrix::from_fn(20, 1, |i, _| x[(i, 0)] + x[(i, 2)]);
        let fit = fit_omp(&x, &y, &OmpConfig { max_predictors: 3, residual_tol: 1e-9 }).unwrap();
        assert!(!fit.support.as_ref().unwrap()[0].contains(&1));
        assert_eq!(fit.coefficients[0][1], 0.0);
    }
}

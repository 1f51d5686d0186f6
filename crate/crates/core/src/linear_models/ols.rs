use nalgebra::DMatrix;

use super::{check_shapes, least_squares, LinearFit, ModelTag};
use crate::error::Result;

/// Ordinary least squares with intercept, one regression per target column.
pub fn fit_ols(inputs: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<LinearFit> {
    check_shapes(inputs, targets)?;
    let mut coefficients = Vec::with_capacity(targets.ncols());
    let mut intercepts = Vec::with_capacity(targets.ncols());
    for y in targets.column_iter() {
        let (beta, b0) = least_squares(inputs, &y.into_owned(), true)?;
        coefficients.push(beta.iter().copied().collect());
        intercepts.push(b0);
    }
    Ok(LinearFit {
        tag: ModelTag::Ols,
        coefficients,
        intercepts,
        support: None,
        iterations: vec![1; targets.ncols()],
        converged: true,
    })
}

//! Linear regressors on lag windows: OLS, Huber (IRLS), Lasso (coordinate
//! descent) and orthogonal matching pursuit.
//!
//! Every fitter treats each target column as an independent regression
//! problem sharing one design matrix, so a two-channel target yields two
//! coefficient vectors and two intercepts.

mod huber;
mod lasso;
mod ols;
mod omp;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kv::{join, KvMap};

pub use huber::{fit_huber, huber_loss, HuberConfig};
pub use lasso::{fit_lasso, soft_threshold, LassoConfig};
pub use ols::fit_ols;
pub use omp::{fit_omp, omp_path, OmpConfig, OmpPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelTag {
    Ols,
    Huber,
    Lasso,
    Omp,
}

impl ModelTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Ols => "ols",
            ModelTag::Huber => "huber",
            ModelTag::Lasso => "lasso",
            ModelTag::Omp => "omp",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ols" => Ok(ModelTag::Ols),
            "huber" => Ok(ModelTag::Huber),
            "lasso" => Ok(ModelTag::Lasso),
            "omp" => Ok(ModelTag::Omp),
            other => Err(Error::InvalidConfig(format!("unknown linear model `{other}`"))),
        }
    }
}

/// Per-channel linear fit. Channel `c` predicts
/// `intercepts[c] + coefficients[c] . row`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub tag: ModelTag,
    pub coefficients: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    /// Selected column indices per channel, ascending by selection order (OMP only).
    pub support: Option<Vec<Vec<usize>>>,
    /// Solver iterations per channel; 1 for closed-form fits.
    pub iterations: Vec<usize>,
    pub converged: bool,
}

impl LinearFit {
    pub fn n_inputs(&self) -> usize {
        self.coefficients.first().map_or(0, Vec::len)
    }

    pub fn n_outputs(&self) -> usize {
        self.intercepts.len()
    }

    pub fn to_kv(&self) -> String {
        let mut out = format!("model_tag={}\nchannels={}\n", self.tag, self.n_outputs());
        for (c, coef) in self.coefficients.iter().enumerate() {
            out.push_str(&format!("coefficients.{c}={}\n", join(coef)));
        }
        out.push_str(&format!("intercepts={}\n", join(&self.intercepts)));
        if let Some(support) = &self.support {
            for (c, s) in support.iter().enumerate() {
                out.push_str(&format!("support.{c}={}\n", join(s)));
            }
        }
        out.push_str(&format!("iterations={}\nconverged={}\n", join(&self.iterations), self.converged));
        out
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let kv = KvMap::parse(text)?;
        let tag: ModelTag = kv.get("model_tag")?;
        let channels: usize = kv.get("channels")?;
        let coefficients = (0..channels)
            .map(|c| kv.list(&format!("coefficients.{c}")))
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let support = if tag == ModelTag::Omp {
            Some(
                (0..channels)
                    .map(|c| kv.list(&format!("support.{c}")))
                    .collect::<Result<Vec<Vec<usize>>>>()?,
            )
        } else {
            None
        };
        let fit = LinearFit {
            tag,
            coefficients,
            intercepts: kv.list("intercepts")?,
            support,
            iterations: kv.list("iterations")?,
            converged: kv.get("converged")?,
        };
        if fit.intercepts.len() != channels {
            return Err(kv.field_error("intercepts", format!("expected {channels} values")));
        }
        Ok(fit)
    }
}

pub fn predict_linear(fit: &LinearFit, row: &[f64]) -> Result<Vec<f64>> {
    if row.len() != fit.n_inputs() {
        return Err(Error::Shape {
            expected: fit.n_inputs(),
            actual: row.len(),
        });
    }
    Ok(fit
        .coefficients
        .iter()
        .zip(&fit.intercepts)
        .map(|(coef, b)| b + coef.iter().zip(row).map(|(w, x)| w * x).sum::<f64>())
        .collect())
}

/// Refits with singular columns removed until the design has full rank.
///
/// Dropped columns get a zero coefficient. Lag designs over a channel that
/// never varies (Case 1 period lengths) are rank deficient by construction;
/// this is the wrapper the evaluation harness uses around the strict fitters.
pub fn fit_dropping_singular<F>(inputs: &DMatrix<f64>, fitter: F) -> Result<LinearFit>
where
    F: Fn(&DMatrix<f64>) -> Result<LinearFit>,
{
    let mut kept: Vec<usize> = (0..inputs.ncols()).collect();
    loop {
        let design = inputs.select_columns(&kept);
        match fitter(&design) {
            Ok(mut fit) => {
                for coef in fit.coefficients.iter_mut() {
                    let mut full = vec![0.0; inputs.ncols()];
                    for (k, &j) in kept.iter().enumerate() {
                        full[j] = coef[k];
                    }
                    *coef = full;
                }
                if let Some(support) = fit.support.as_mut() {
                    for s in support.iter_mut() {
                        s.iter_mut().for_each(|k| *k = kept[*k]);
                    }
                }
                return Ok(fit);
            }
            Err(Error::SingularDesign { column }) if column < kept.len() => {
                kept.remove(column);
            }
            Err(e) => return Err(e),
        }
    }
}

fn check_shapes(inputs: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<()> {
    if inputs.nrows() != targets.nrows() {
        return Err(Error::Shape {
            expected: inputs.nrows(),
            actual: targets.nrows(),
        });
    }
    if targets.ncols() == 0 {
        return Err(Error::EmptyInput("targets"));
    }
    if inputs.nrows() < inputs.ncols() + 1 {
        return Err(Error::InsufficientHistory {
            required: inputs.ncols() + 1,
            available: inputs.nrows(),
        });
    }
    Ok(())
}

/// Relative pivot size below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

/// Least squares `y ~ b0 + X beta` (or without `b0`) by Householder QR.
///
/// A column whose R pivot is negligible relative to its own norm lies in the
/// span of the columns before it and is reported by input index.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, intercept: bool) -> Result<(DVector<f64>, f64)> {
    let n = x.nrows();
    let offset = usize::from(intercept);
    let m = x.ncols() + offset;
    if n < m {
        return Err(Error::InsufficientHistory {
            required: m,
            available: n,
        });
    }
    let design = if intercept {
        x.clone().insert_column(0, 1.0)
    } else {
        x.clone()
    };
    if m == 0 {
        return Ok((DVector::zeros(0), 0.0));
    }
    let qr = design.clone().qr();
    let r = qr.r();
    for j in 0..m {
        let norm = design.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm {
            if j < offset {
                return Err(Error::EmptyInput("design rows"));
            }
            return Err(Error::SingularDesign { column: j - offset });
        }
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign { column: 0 })?;
    if intercept {
        Ok((beta.rows(1, m - 1).into_owned(), beta[0]))
    } else {
        Ok((beta, 0.0))
    }
}

//! Lag embedding of a cycle series into supervised (input, target) rows, and
//! min-max scaling.
//!
//! Window `w` ends at record `t = w + L - 1`. Its input row interleaves the two
//! channels oldest first, `(c[t-L+1], p[t-L+1], ..., c[t], p[t])`, and its
//! target row holds the next `P` records in the same interleaved layout.

use nalgebra::DMatrix;

use crate::datagen::CycleSeries;
use crate::error::{Error, Result};

pub const DEFAULT_LAGS: usize = 3;
pub const DEFAULT_HORIZON: usize = 1;
/// Number of channels per record: cycle length, period length.
pub const CHANNELS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedWindows {
    pub inputs: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    pub lags: usize,
    pub horizon: usize,
}

impl SupervisedWindows {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    /// Index of the last record feeding window `w`.
    pub fn origin(&self, w: usize) -> usize {
        w + self.lags - 1
    }
}

/// Flattens the trailing `lags` pairs of `history` into one interleaved input row.
pub fn lag_row(history: &[[f64; 2]], lags: usize) -> Result<Vec<f64>> {
    if history.len() < lags {
        return Err(Error::InsufficientHistory {
            required: lags,
            available: history.len(),
        });
    }
    Ok(history[history.len() - lags..]
        .iter()
        .flat_map(|pair| pair.iter().copied())
        .collect())
}

pub fn make_windows(series: &CycleSeries, lags: usize, horizon: usize) -> Result<SupervisedWindows> {
    windows_from_pairs(&series.pairs(), lags, horizon)
}

pub fn windows_from_pairs(pairs: &[[f64; 2]], lags: usize, horizon: usize) -> Result<SupervisedWindows> {
    if lags == 0 || horizon == 0 {
        return Err(Error::InvalidConfig("window length and horizon must be positive".into()));
    }
    if pairs.len() < lags + horizon {
        return Err(Error::InsufficientHistory {
            required: lags + horizon,
            available: pairs.len(),
        });
    }
    let rows = pairs.len() - lags - horizon + 1;
    let inputs = DMatrix::from_fn(rows, CHANNELS * lags, |w, j| pairs[w + j / CHANNELS][j % CHANNELS]);
    let targets = DMatrix::from_fn(rows, CHANNELS * horizon, |w, j| {
        pairs[w + lags + j / CHANNELS][j % CHANNELS]
    });
    Ok(SupervisedWindows {
        inputs,
        targets,
        lags,
        horizon,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn columns(&self) -> usize {
        self.min.len()
    }

    /// Collapses a lag-interleaved scaler to one column per channel, taking the
    /// extreme over every lag position of that channel.
    pub fn pooled_by_channel(&self, channels: usize) -> ScalerParams {
        let mut min = vec![f64::INFINITY; channels];
        let mut max = vec![f64::NEG_INFINITY; channels];
        for j in 0..self.columns() {
            min[j % channels] = min[j % channels].min(self.min[j]);
            max[j % channels] = max[j % channels].max(self.max[j]);
        }
        ScalerParams { min, max }
    }

    fn check(&self, cols: usize) -> Result<()> {
        if cols != self.columns() {
            return Err(Error::Shape {
                expected: self.columns(),
                actual: cols,
            });
        }
        Ok(())
    }

    pub fn scale_value(&self, col: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[col], self.max[col]);
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.5
        }
    }

    pub fn unscale_value(&self, col: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[col], self.max[col]);
        if hi > lo {
            lo + v * (hi - lo)
        } else {
            lo
        }
    }
}

pub fn fit_scaler(windows: &SupervisedWindows) -> Result<ScalerParams> {
    fit_scaler_matrix(&windows.inputs)
}

pub fn fit_scaler_matrix(matrix: &DMatrix<f64>) -> Result<ScalerParams> {
    if matrix.nrows() == 0 {
        return Err(Error::EmptyInput("scaler input"));
    }
    let (min, max) = matrix
        .column_iter()
        .map(|col| (col.min(), col.max()))
        .unzip();
    Ok(ScalerParams { min, max })
}

/// Maps each column affinely onto `[0, 1]`; constant columns map to 0.5.
pub fn apply_scaler(params: &ScalerParams, matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    params.check(matrix.ncols())?;
    Ok(DMatrix::from_fn(matrix.nrows(), matrix.ncols(), |i, j| {
        params.scale_value(j, matrix[(i, j)])
    }))
}

pub fn invert_scaler(params: &ScalerParams, matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    params.check(matrix.ncols())?;
    Ok(DMatrix::from_fn(matrix.nrows(), matrix.ncols(), |i, j| {
        params.unscale_value(j, matrix[(i, j)])
    }))
}

/// Held-out split used by the evaluation protocol: the first `len - holdout`
/// records train, the rest are scored.
pub fn train_test_split(series: &CycleSeries, holdout: usize) -> Result<(CycleSeries, Vec<[f64; 2]>)> {
    if holdout >= series.len() {
        return Err(Error::InsufficientHistory {
            required: holdout + 1,
            available: series.len(),
        });
    }
    let cut = series.len() - holdout;
    Ok((series.head(cut)?, series.pairs()[cut..].to_vec()))
}

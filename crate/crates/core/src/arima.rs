//! ARIMA(p, d, q) on a single channel.
//!
//! The series is differenced `d` times and an ARMA(p, q) model
//!
//! ```text
//! y'[t] = c + sum_i phi[i] y'[t-i] + sum_j theta[j] e[t-j] + e[t]
//! ```
//!
//! is estimated by Hannan–Rissanen regression: a long autoregression supplies
//! proxy shocks, the ARMA regression is run on lagged values and lagged proxy
//! shocks, and one refinement pass re-runs the regression on shocks recomputed
//! from the model itself. Forecasts set future shocks to zero and undo the
//! differencing.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kv::{join, KvMap};
use crate::linear_models::least_squares;

const MAX_ORDER: usize = 10;
const MAX_DIFFERENCING: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArimaConfig {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl Default for ArimaConfig {
    fn default() -> Self {
        Self { p: 1, d: 1, q: 1 }
    }
}

impl ArimaConfig {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p > MAX_ORDER || self.q > MAX_ORDER || self.d > MAX_DIFFERENCING {
            return Err(Error::InvalidConfig(format!(
                "arima orders ({}, {}, {}) exceed p, q <= {MAX_ORDER}, d <= {MAX_DIFFERENCING}",
                self.p, self.d, self.q
            )));
        }
        Ok(())
    }

    /// Leading differenced observations without a full set of lags.
    pub fn warmup(&self) -> usize {
        self.p.max(self.q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaFit {
    pub order: ArimaConfig,
    pub c: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma2: f64,
    /// In-sample shocks for differenced indices `warmup..`.
    pub residuals: Vec<f64>,
    /// First value at each differencing level, for inversion.
    pub initial_values: Vec<f64>,
    /// The series on the differenced scale.
    pub differenced: Vec<f64>,
    /// All AR roots lie outside the unit circle.
    pub stationary: bool,
    /// Set when the ARMA regression was singular and the mean model was used.
    pub fallback_mean: bool,
}

pub fn difference(series: &[f64], d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if series.len() <= d {
        return Err(Error::InsufficientHistory {
            required: d + 1,
            available: series.len(),
        });
    }
    let mut current = series.to_vec();
    let mut initial = Vec::with_capacity(d);
    for _ in 0..d {
        initial.push(current[0]);
        current = current.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok((current, initial))
}

pub fn inverse_difference(differenced: &[f64], initial_values: &[f64], d: usize) -> Result<Vec<f64>> {
    if initial_values.len() != d {
        return Err(Error::Shape {
            expected: d,
            actual: initial_values.len(),
        });
    }
    let mut current = differenced.to_vec();
    for &start in initial_values.iter().rev() {
        let mut level = Vec::with_capacity(current.len() + 1);
        level.push(start);
        for v in &current {
            let last = *level.last().unwrap();
            level.push(last + v);
        }
        current = level;
    }
    Ok(current)
}

/// Shocks implied by the model, with zeros before `warmup`.
fn filter_shocks(y: &[f64], c: f64, phi: &[f64], theta: &[f64], warmup: usize) -> Vec<f64> {
    let mut eps = vec![0.0; y.len()];
    for t in warmup..y.len() {
        let mut pred = c;
        for (i, f) in phi.iter().enumerate() {
            pred += f * y[t - 1 - i];
        }
        for (j, th) in theta.iter().enumerate() {
            pred += th * eps[t - 1 - j];
        }
        eps[t] = y[t] - pred;
    }
    eps
}

/// Regresses `y[t]` on `[y[t-1..=t-p], shocks[t-1..=t-q]]` for `t in start..`.
fn arma_regression(
    y: &[f64],
    shocks: &[f64],
    p: usize,
    q: usize,
    start: usize,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let rows = y.len() - start;
    let x = DMatrix::from_fn(rows, p + q, |r, k| {
        let t = start + r;
        if k < p {
            y[t - 1 - k]
        } else {
            shocks[t - 1 - (k - p)]
        }
    });
    let target = DVector::from_fn(rows, |r, _| y[start + r]);
    let (beta, c) = least_squares(&x, &target, true)?;
    Ok((c, beta.rows(0, p).iter().copied().collect(), beta.rows(p, q).iter().copied().collect()))
}

/// Proxy shocks from a least-squares AR(`order`) fit; `None` where undefined.
fn long_ar_shocks(y: &[f64], order: usize) -> Option<Vec<f64>> {
    let (c, phi, _) = arma_regression(y, y, order, 0, order).ok()?;
    let mut shocks = vec![0.0; y.len()];
    for t in order..y.len() {
        let pred: f64 = c + phi.iter().enumerate().map(|(i, f)| f * y[t - 1 - i]).sum::<f64>();
        shocks[t] = y[t] - pred;
    }
    Some(shocks)
}

fn is_stationary(phi: &[f64]) -> bool {
    if phi.is_empty() {
        return true;
    }
    // roots of 1 - sum phi z^i outside the unit circle <=> companion eigenvalues inside
    companion(phi, 1.0).complex_eigenvalues().iter().all(|z| z.norm() < 1.0)
}

/// Largest modulus allowed for an inverse MA root.
const MAX_MA_ROOT: f64 = 0.99;

/// Companion matrix whose eigenvalues are the inverse roots of
/// `1 + sum coeffs[i] z^(i+1)` (sign flipped for `1 - sum phi z^i`).
fn companion(coeffs: &[f64], sign: f64) -> DMatrix<f64> {
    let p = coeffs.len();
    DMatrix::from_fn(p, p, |i, j| {
        if i == 0 {
            sign * coeffs[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// Maps MA coefficients to an invertible polynomial: inverse roots outside
/// the unit circle are reflected to `1/conj(r)` (same autocorrelations), and
/// moduli are capped at `MAX_MA_ROOT` so filtered shocks decay.
fn invertible_ma(theta: &[f64]) -> Vec<f64> {
    if theta.is_empty() || !theta.iter().all(|t| t.is_finite()) {
        return theta.to_vec();
    }
    let roots = companion(theta, -1.0).complex_eigenvalues();
    if roots.iter().all(|r| r.norm() <= MAX_MA_ROOT) {
        return theta.to_vec();
    }
    let mut poly = vec![Complex::new(1.0, 0.0)];
    for r in roots.iter() {
        let mut r = *r;
        if r.norm() > 1.0 {
            r = r.conj().inv();
        }
        if r.norm() > MAX_MA_ROOT {
            r *= MAX_MA_ROOT / r.norm();
        }
        // multiply by (1 - r z)
        let mut next = poly.clone();
        next.push(Complex::new(0.0, 0.0));
        for i in 1..next.len() {
            next[i] -= r * poly[i - 1];
        }
        poly = next;
    }
    poly[1..].iter().map(|c| c.re).collect()
}

pub fn fit_arima(series: &[f64], config: &ArimaConfig) -> Result<ArimaFit> {
    config.validate()?;
    let ArimaConfig { p, d, q } = *config;
    let (y, initial_values) = difference(series, d)?;
    let n = y.len();
    let minimum = p + q + 2;
    if n < minimum {
        return Err(Error::InsufficientHistory {
            required: minimum + d,
            available: series.len(),
        });
    }
    let warmup = config.warmup();

    let estimated = if p == 0 && q == 0 {
        None
    } else if q == 0 {
        arma_regression(&y, &y, p, 0, p).ok()
    } else {
        hannan_rissanen(&y, p, q)
    };
    let (c, phi, theta, fallback_mean) = match estimated {
        Some((c, phi, theta)) => (c, phi, invertible_ma(&theta), false),
        None => {
            let mean = y.iter().sum::<f64>() / n as f64;
            (mean, vec![0.0; p], vec![0.0; q], p + q > 0)
        }
    };
    let shocks = filter_shocks(&y, c, &phi, &theta, warmup);
    let residuals = shocks[warmup..].to_vec();
    let sigma2 = residuals.iter().map(|e| e * e).sum::<f64>() / residuals.len() as f64;
    Ok(ArimaFit {
        order: *config,
        stationary: is_stationary(&phi),
        c,
        phi,
        theta,
        sigma2,
        residuals,
        initial_values,
        differenced: y,
        fallback_mean,
    })
}

fn hannan_rissanen(y: &[f64], p: usize, q: usize) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let enough_rows = |start: usize| n > start && n - start >= p + q + 2;
    let mut long_order = (n / 4).min(10);
    if !enough_rows(p.max(long_order + q)) {
        long_order = 0;
    }
    let proxy = if long_order == 0 {
        let mean = y.iter().sum::<f64>() / n as f64;
        y.iter().map(|v| v - mean).collect()
    } else {
        long_ar_shocks(y, long_order)?
    };
    let start = p.max(long_order + q);
    if !enough_rows(start) {
        return None;
    }
    let (c, phi, theta) = arma_regression(y, &proxy, p, q, start).ok()?;
    let theta = invertible_ma(&theta);

    let warmup = p.max(q);
    let shocks = filter_shocks(y, c, &phi, &theta, warmup);
    if shocks.iter().any(|e| !e.is_finite()) {
        return Some((c, phi, theta));
    }
    match arma_regression(y, &shocks, p, q, warmup) {
        Ok(refined) if filter_shocks(y, refined.0, &refined.1, &refined.2, warmup)
            .iter()
            .all(|e| e.is_finite()) =>
        {
            Some(refined)
        }
        _ => Some((c, phi, theta)),
    }
}

fn forecast_differenced(fit: &ArimaFit, h: usize) -> Vec<f64> {
    let warmup = fit.order.warmup();
    let mut y = fit.differenced.clone();
    let mut eps = vec![0.0; warmup.min(y.len())];
    eps.extend_from_slice(&fit.residuals);
    eps.resize(y.len(), 0.0);
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        let t = y.len();
        let mut pred = fit.c;
        for (i, f) in fit.phi.iter().enumerate() {
            if t > i {
                pred += f * y[t - 1 - i];
            }
        }
        for (j, th) in fit.theta.iter().enumerate() {
            if t > j {
                pred += th * eps[t - 1 - j];
            }
        }
        y.push(pred);
        eps.push(0.0);
        out.push(pred);
    }
    out
}

/// `h`-step forecast in the original units, future shocks set to zero.
pub fn forecast_arima(fit: &ArimaFit, h: usize) -> Result<Vec<f64>> {
    if h == 0 {
        return Err(Error::InvalidConfig("forecast horizon must be positive".into()));
    }
    let diffs = forecast_differenced(fit, h);
    let d = fit.order.d;
    if d == 0 {
        return Ok(diffs);
    }
    let mut extended = fit.differenced.clone();
    extended.extend_from_slice(&diffs);
    let levels = inverse_difference(&extended, &fit.initial_values, d)?;
    Ok(levels[levels.len() - h..].to_vec())
}

impl ArimaFit {
    /// Re-anchors the fitted coefficients on a different history: the
    /// history is differenced and its shocks filtered with the fitted model.
    pub fn conditioned_on(&self, history: &[f64]) -> Result<ArimaFit> {
        let (y, initial_values) = difference(history, self.order.d)?;
        let warmup = self.order.warmup();
        if y.len() < warmup {
            return Err(Error::InsufficientHistory {
                required: warmup + self.order.d,
                available: history.len(),
            });
        }
        let shocks = filter_shocks(&y, self.c, &self.phi, &self.theta, warmup);
        Ok(ArimaFit {
            residuals: shocks[warmup..].to_vec(),
            initial_values,
            differenced: y,
            ..self.clone()
        })
    }

    pub fn to_kv(&self) -> String {
        format!(
            "p={}\nd={}\nq={}\nc={}\nphi={}\ntheta={}\nsigma2={}\ninitial_values={}\n\
             differenced={}\nresiduals={}\nstationary={}\nfallback_mean={}\n",
            self.order.p,
            self.order.d,
            self.order.q,
            self.c,
            join(&self.phi),
            join(&self.theta),
            self.sigma2,
            join(&self.initial_values),
            join(&self.differenced),
            join(&self.residuals),
            self.stationary,
            self.fallback_mean
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let kv = KvMap::parse(text)?;
        let order = ArimaConfig::new(kv.get("p")?, kv.get("d")?, kv.get("q")?);
        order.validate()?;
        let fit = ArimaFit {
            order,
            c: kv.get("c")?,
            phi: kv.list("phi")?,
            theta: kv.list("theta")?,
            sigma2: kv.get("sigma2")?,
            initial_values: kv.list("initial_values")?,
            differenced: kv.list("differenced")?,
            residuals: kv.list("residuals")?,
            stationary: kv.get("stationary")?,
            fallback_mean: kv.get("fallback_mean")?,
        };
        if fit.phi.len() != order.p || fit.theta.len() != order.q || fit.initial_values.len() != order.d {
            return Err(kv.field_error("phi", "coefficient counts do not match the orders"));
        }
        Ok(fit)
    }
}

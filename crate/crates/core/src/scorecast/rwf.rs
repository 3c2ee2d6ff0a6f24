use super::{FittedParams, Method, ScoreForecast};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RwfFit {
    pub drift: f64,
    /// Sample variance of the first differences about the drift.
    pub sigma2: f64,
    pub n: usize,
}

/// Random walk with drift: `y_n + h * (y_n - y_1) / (n - 1)`.
pub fn rwf(y: &[f64], horizon: usize) -> Result<ScoreForecast> {
    let n = y.len();
    if n < 2 {
        return Err(Error::Input(format!("rwf needs at least 2 observations, got {n}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("series contains non-finite values".into()));
    }
    let last = y[n - 1];
    let drift = (last - y[0]) / (n - 1) as f64;
    let diffs: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let sigma2 = crate::stats::variance_about(&diffs, drift);
    let m = (n - 1) as f64;
    let point = (1..=horizon).map(|h| last + h as f64 * (last - y[0]) / m).collect();
    let variance = (1..=horizon)
        .map(|h| {
            let h = h as f64;
            sigma2 * h * (1.0 + h / m)
        })
        .collect();
    Ok(ScoreForecast {
        method: Method::Rwf,
        point,
        variance,
        long_run_slope: drift,
        params: FittedParams::Rwf(RwfFit { drift, sigma2, n }),
        warning: None,
    })
}

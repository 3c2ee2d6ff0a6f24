//! Univariate forecasting of principal component scores.

mod arima;
mod ets;
mod optim;
mod rwf;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::multilevel::MultilevelDecomposition;

pub use arima::{
    arima, arima_forecast, auto_arima, difference, is_invertible, is_stationary, kpss_statistic,
    min_root_modulus, select_differences, ArimaFit, ArimaOrder, KPSS_CRITICAL, MIN_ROOT_MODULUS,
};
pub use ets::{auto_ets, ets, ets_fixed, ets_forecast, EtsFit, EtsModel};
pub use rwf::{rwf, RwfFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Method {
    #[default]
    Rwf,
    Arima,
    Ets,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Rwf, Method::Arima, Method::Ets];
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rwf" => Ok(Method::Rwf),
            "arima" => Ok(Method::Arima),
            "ets" => Ok(Method::Ets),
            other => Err(Error::Input(format!("unknown method `{other}` (expected rwf, arima or ets)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Rwf => "rwf",
            Method::Arima => "arima",
            Method::Ets => "ets",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedParams {
    Rwf(RwfFit),
    Arima(ArimaFit),
    Ets(EtsFit),
}

impl FittedParams {
    pub fn model_name(&self) -> String {
        match self {
            FittedParams::Rwf(_) => "RWF with drift".into(),
            FittedParams::Arima(f) => f.order.to_string(),
            FittedParams::Ets(f) => f.model.name().into(),
        }
    }

    /// Named parameter values for audit output.
    pub fn values(&self) -> Vec<(String, f64)> {
        match self {
            FittedParams::Rwf(f) => vec![("drift".into(), f.drift), ("sigma2".into(), f.sigma2)],
            FittedParams::Arima(f) => {
                let mut v = vec![("constant".into(), f.constant)];
                v.extend(f.ar.iter().enumerate().map(|(i, a)| (format!("ar{}", i + 1), *a)));
                v.extend(f.ma.iter().enumerate().map(|(i, a)| (format!("ma{}", i + 1), *a)));
                v.push(("sigma2".into(), f.sigma2));
                v.push(("aicc".into(), f.aicc));
                v
            }
            FittedParams::Ets(f) => {
                let mut v = vec![("alpha".into(), f.alpha)];
                if f.model != EtsModel::Level {
                    v.push(("beta".into(), f.beta));
                }
                if f.model == EtsModel::DampedTrend {
                    v.push(("phi".into(), f.phi));
                }
                v.push(("level".into(), f.level));
                if f.model != EtsModel::Level {
                    v.push(("trend".into(), f.trend));
                }
                v.push(("sigma2".into(), f.sigma2));
                v.push(("aicc".into(), f.aicc));
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreForecast {
    pub method: Method,
    /// Point forecasts for h = 1..H.
    pub point: Vec<f64>,
    /// Forecast-error variances for h = 1..H.
    pub variance: Vec<f64>,
    /// Per-step change of the point forecast as h grows without bound.
    pub long_run_slope: f64,
    pub params: FittedParams,
    /// Set when the requested model could not be fitted and a fallback was used.
    pub warning: Option<String>,
}

impl ScoreForecast {
    /// Forecast of a series that is identically zero.
    pub fn zero(method: Method, horizon: usize) -> Self {
        ScoreForecast {
            method,
            point: vec![0.0; horizon],
            variance: vec![0.0; horizon],
            long_run_slope: 0.0,
            params: FittedParams::Rwf(RwfFit { drift: 0.0, sigma2: 0.0, n: 0 }),
            warning: None,
        }
    }

    pub fn horizon(&self) -> usize {
        self.point.len()
    }
}

/// Forecast one score series with the given method.
pub fn forecast_series(y: &[f64], method: Method, horizon: usize) -> Result<ScoreForecast> {
    match method {
        Method::Rwf => rwf(y, horizon),
        Method::Arima => arima(y, horizon),
        Method::Ets => ets(y, horizon),
    }
}

/// Forecasts for every common component and every population-specific component.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreForecasts {
    pub method: Method,
    pub horizon: usize,
    /// One per common component k.
    pub common: Vec<ScoreForecast>,
    /// Per population (decomposition order), one per residual component l.
    pub residual: Vec<Vec<ScoreForecast>>,
}

impl ScoreForecasts {
    pub fn count(&self) -> usize {
        self.common.len() + self.residual.iter().map(Vec::len).sum::<usize>()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.common
            .iter()
            .chain(self.residual.iter().flatten())
            .filter_map(|f| f.warning.clone())
            .collect()
    }
}

/// Forecast a score series in which years with `keep[t] == false` count as missing.
///
/// Interior gaps are filled by linear interpolation between the neighbouring kept
/// years, leading gaps are dropped, and trailing gaps are forecast through: the model
/// is fitted up to the last kept year and its forecasts are shifted by the gap.
pub fn forecast_with_missing(y: &[f64], keep: &[bool], method: Method, horizon: usize) -> Result<ScoreForecast> {
    if keep.len() != y.len() {
        return Err(crate::error::shape(format!("{} weights for {} scores", keep.len(), y.len())));
    }
    let kept: Vec<usize> = (0..y.len()).filter(|&t| keep[t]).collect();
    if kept.len() == y.len() {
        return forecast_series(y, method, horizon);
    }
    if kept.len() < 2 {
        return Err(Error::Input(format!("only {} usable years in the score series", kept.len())));
    }
    let (first, last) = (kept[0], kept[kept.len() - 1]);
    let mut z = Vec::with_capacity(last - first + 1);
    for pair in kept.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for t in a..b {
            let frac = (t - a) as f64 / (b - a) as f64;
            z.push(y[a] + frac * (y[b] - y[a]));
        }
    }
    z.push(y[last]);
    let gap = y.len() - 1 - last;
    let mut fc = forecast_series(&z, method, horizon + gap)?;
    fc.point.drain(..gap);
    fc.variance.drain(..gap);
    Ok(fc)
}

fn forecast_columns(
    scores: &nalgebra::DMatrix<f64>,
    keep: &[bool],
    method: Method,
    horizon: usize,
    what: &str,
) -> Result<Vec<ScoreForecast>> {
    (0..scores.ncols())
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = scores.column(k).iter().copied().collect();
            forecast_with_missing(&y, keep, method, horizon).map_err(|e| e.context(format!("{what} component {}", k + 1)))
        })
        .collect()
}

/// Independent univariate forecasts of every score series of a decomposition.
/// Years flagged as outlying by a robust fit are treated as missing.
pub fn forecast_all_scores(dec: &MultilevelDecomposition, method: Method, horizon: usize) -> Result<ScoreForecasts> {
    if horizon == 0 {
        return Err(Error::Input("forecast horizon must be at least 1".into()));
    }
    let common = forecast_columns(&dec.common.scores, &dec.common.obs_weights, method, horizon, "common")?;
    let residual = dec
        .residual
        .iter()
        .zip(&dec.labels)
        .map(|(r, label)| forecast_columns(&r.scores, &r.obs_weights, method, horizon, &format!("population {label}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreForecasts { method, horizon, common, residual })
}

/// Long-format CSV of fitted parameters: `series,component,method,model,parameter,value`.
pub fn parameters_csv(fc: &ScoreForecasts, labels: &[String]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("series,component,method,model,parameter,value\n");
    let mut emit = |series: &str, k: usize, f: &ScoreForecast| {
        let model = f.params.model_name();
        for (name, v) in f.params.values() {
            let _ = writeln!(out, "{series},{},{},\"{model}\",{name},{v}", k + 1, f.method);
        }
    };
    for (k, f) in fc.common.iter().enumerate() {
        emit("common", k, f);
    }
    for (label, fs) in labels.iter().zip(&fc.residual) {
        for (k, f) in fs.iter().enumerate() {
            emit(label, k, f);
        }
    }
    out
}

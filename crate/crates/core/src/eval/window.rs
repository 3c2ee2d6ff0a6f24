//! Expanding-window forecasting and per-horizon scoring.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::metrics::{error_metrics, interval_metrics, interval_score, IntervalMetrics, PointMetrics};
use crate::error::{Error, Result};
use crate::ingest::MortalityDataset;
use crate::pipeline::{fit_and_forecast, ForecastSettings};
use crate::smooth::SmoothedDataset;
use crate::uncertainty::{life_expectancy, ForecastBundle};

/// Shortest training sample allowed in a window.
pub const MIN_TRAINING_YEARS: usize = 10;

/// Forecasts of one window on the rate scale, one entry per population.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowForecast {
    /// H x p point forecasts of central death rates.
    pub rates: Vec<DMatrix<f64>>,
    pub lower: Vec<DMatrix<f64>>,
    pub upper: Vec<DMatrix<f64>>,
    pub e0: Vec<Vec<f64>>,
    pub e0_lower: Vec<Vec<f64>>,
    pub e0_upper: Vec<Vec<f64>>,
}

impl WindowForecast {
    /// Point rates plus intervals at coverage `1 - alpha`.
    pub fn from_bundle(bundle: &ForecastBundle, alpha: f64) -> Result<Self> {
        let level = 1.0 - alpha;
        let n_pop = bundle.labels.len();
        let mut out = WindowForecast {
            rates: bundle.point.iter().map(|p| p.map(f64::exp)).collect(),
            lower: Vec::with_capacity(n_pop),
            upper: Vec::with_capacity(n_pop),
            e0: bundle.e0_point.clone(),
            e0_lower: Vec::with_capacity(n_pop),
            e0_upper: Vec::with_capacity(n_pop),
        };
        for j in 0..n_pop {
            let b = bundle.band(j, level)?;
            out.lower.push(b.lower);
            out.upper.push(b.upper);
            let e = bundle.e0_band(j, level)?;
            out.e0_lower.push(e.lower.row(0).iter().copied().collect());
            out.e0_upper.push(e.upper.row(0).iter().copied().collect());
        }
        Ok(out)
    }

    pub fn horizon(&self) -> usize {
        self.e0.first().map_or(0, Vec::len)
    }
}

/// Anything that can forecast from a training prefix. `smoothed` is the smoothed
/// version of `train` (smoothing is per year, so prefixes of one smoothing pass are exact).
pub trait Forecaster: Sync {
    fn forecast(&self, train: &MortalityDataset, smoothed: &SmoothedDataset, horizon: usize) -> Result<WindowForecast>;
}

/// The full decomposition and bootstrap pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineForecaster {
    pub settings: ForecastSettings,
    /// Interval tail probability, e.g. 0.2 for 80% intervals.
    pub alpha: f64,
}

impl Forecaster for PipelineForecaster {
    fn forecast(&self, _train: &MortalityDataset, smoothed: &SmoothedDataset, horizon: usize) -> Result<WindowForecast> {
        let settings = ForecastSettings { horizon, ..self.settings };
        let out = fit_and_forecast(smoothed, &settings)?;
        WindowForecast::from_bundle(&out.bundle, self.alpha)
    }
}

/// Returns the observed future exactly, with degenerate intervals.
#[derive(Debug, Clone)]
pub struct OracleForecaster {
    pub actuals: Actuals,
}

impl Forecaster for OracleForecaster {
    fn forecast(&self, train: &MortalityDataset, _smoothed: &SmoothedDataset, horizon: usize) -> Result<WindowForecast> {
        let start = train.n_years();
        let rates: Vec<DMatrix<f64>> = self.actuals.rates.iter().map(|r| r.rows(start, horizon).into_owned()).collect();
        let e0: Vec<Vec<f64>> = self.actuals.e0.iter().map(|e| e[start..start + horizon].to_vec()).collect();
        Ok(WindowForecast { lower: rates.clone(), upper: rates.clone(), rates, e0_lower: e0.clone(), e0_upper: e0.clone(), e0 })
    }
}

/// Observed rates and life expectancies for every year of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Actuals {
    pub rates: Vec<DMatrix<f64>>,
    pub mask: Vec<DMatrix<bool>>,
    pub e0: Vec<Vec<f64>>,
}

/// Life expectancy of observed rates; masked cells and a zero open-age rate are
/// filled from the smoothed surface so every year has a defined value.
pub fn actuals(ds: &MortalityDataset, smoothed: &SmoothedDataset) -> Result<Actuals> {
    let ages = ds.grid.ages();
    let p = ages.len();
    let mut out = Actuals { rates: Vec::new(), mask: Vec::new(), e0: Vec::new() };
    for (s, sm) in ds.populations.iter().zip(&smoothed.populations) {
        let e0 = (0..ds.n_years())
            .map(|t| {
                let m: Vec<f64> = (0..p)
                    .map(|i| {
                        let filled = s.mask[(t, i)] || (i + 1 == p && s.rates[(t, i)] <= 0.0);
                        if filled { sm.values[(t, i)].exp() } else { s.rates[(t, i)] }
                    })
                    .collect();
                life_expectancy(&m, ages)
            })
            .collect::<Result<Vec<_>>>()?;
        out.rates.push(s.rates.clone());
        out.mask.push(s.mask.clone());
        out.e0.push(e0);
    }
    Ok(out)
}

/// Training lengths of the windows: `n - test_len, ..., n - 1`.
pub fn window_train_lengths(n: usize, test_len: usize) -> Result<Vec<usize>> {
    if test_len == 0 {
        return Err(Error::Input("test length must be at least 1".into()));
    }
    if n < test_len + MIN_TRAINING_YEARS {
        return Err(Error::Input(format!(
            "{n} years cannot hold a {test_len}-year test period after {MIN_TRAINING_YEARS} training years"
        )));
    }
    Ok((n - test_len..n).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub train_len: usize,
    pub forecast: WindowForecast,
}

/// Refit on every expanding training prefix and forecast to the end of the data.
pub fn expanding_window<F: Forecaster>(
    ds: &MortalityDataset,
    smoothed: &SmoothedDataset,
    forecaster: &F,
    test_len: usize,
) -> Result<Vec<WindowResult>> {
    let n = ds.n_years();
    if smoothed.n_years() != n {
        return Err(crate::error::shape("smoothed data do not cover the dataset years"));
    }
    window_train_lengths(n, test_len)?
        .into_par_iter()
        .map(|len| {
            let train = ds.head(len)?;
            let sm = smoothed.head(len)?;
            let forecast = forecaster
                .forecast(&train, &sm, n - len)
                .map_err(|e| e.context(format!("window ending {}", ds.years[len - 1])))?;
            if forecast.horizon() != n - len {
                return Err(crate::error::shape(format!("forecaster returned {} steps, {} expected", forecast.horizon(), n - len)));
            }
            Ok(WindowResult { train_len: len, forecast })
        })
        .collect()
}

/// Accuracy at one horizon for one population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonMetrics {
    pub h: usize,
    /// Number of forecast curves at this horizon.
    pub forecasts: usize,
    /// Number of unmasked mortality cells scored.
    pub cells: usize,
    pub mortality: PointMetrics,
    pub e0: PointMetrics,
    pub mortality_interval: IntervalMetrics,
    pub e0_interval: IntervalMetrics,
}

/// Per population, per horizon `1..=test_len`, the point and interval accuracy.
/// Masked cells are left out of both numerators and denominators.
pub fn score_windows(results: &[WindowResult], actual: &Actuals, alpha: f64, test_len: usize) -> Result<Vec<Vec<HorizonMetrics>>> {
    let n_pop = actual.rates.len();
    (0..n_pop)
        .map(|j| {
            (1..=test_len)
                .filter_map(|h| {
                    let at_h: Vec<&WindowResult> = results.iter().filter(|r| r.forecast.horizon() >= h).collect();
                    if at_h.is_empty() {
                        return None;
                    }
                    Some(score_horizon(&at_h, actual, j, h, alpha))
                })
                .collect()
        })
        .collect()
}

fn score_horizon(at_h: &[&WindowResult], actual: &Actuals, j: usize, h: usize, alpha: f64) -> Result<HorizonMetrics> {
    let mut errors = Vec::new();
    let mut scores = Vec::new();
    let mut e0_errors = Vec::new();
    let mut e0_scores = Vec::new();
    for r in at_h {
        let k = r.train_len + h - 1;
        let f = &r.forecast;
        let p = actual.rates[j].ncols();
        for i in 0..p {
            if actual.mask[j][(k, i)] {
                continue;
            }
            let y = actual.rates[j][(k, i)];
            errors.push(y - f.rates[j][(h - 1, i)]);
            scores.push(interval_score(f.lower[j][(h - 1, i)], f.upper[j][(h - 1, i)], y, alpha)?);
        }
        let y = actual.e0[j][k];
        e0_errors.push(y - f.e0[j][h - 1]);
        e0_scores.push(interval_score(f.e0_lower[j][h - 1], f.e0_upper[j][h - 1], y, alpha)?);
    }
    Ok(HorizonMetrics {
        h,
        forecasts: at_h.len(),
        cells: errors.len(),
        mortality: error_metrics(&errors)?,
        e0: error_metrics(&e0_errors)?,
        mortality_interval: interval_metrics(&scores)?,
        e0_interval: interval_metrics(&e0_scores)?,
    })
}

//! Pre-smoothing of log mortality: one weighted L1 fit per year and population.
//!
//! Weights are inverse measurement variances of the log rates. Cells whose variance
//! is undefined (masked, or zero observed deaths) get weight 0 and are filled in by
//! the fit.

mod curve;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{AgeGrid, MortalityDataset, Series};

pub use curve::{smooth_curve, smoothing_objective};

pub const DEFAULT_ALPHA: f64 = 10.0;
pub const DEFAULT_MONOTONE_FROM: f64 = 65.0;

/// Sampling model for the observed death rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceModel {
    #[default]
    Poisson,
    Binomial,
}

impl std::str::FromStr for VarianceModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(Self::Poisson),
            "binomial" => Ok(Self::Binomial),
            other => Err(Error::Input(format!("unknown variance model `{other}`"))),
        }
    }
}

impl std::fmt::Display for VarianceModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Poisson => "poisson",
            Self::Binomial => "binomial",
        })
    }
}

/// Delta-method variance of `ln m`; `None` where it is undefined (`m <= 0` or `N <= 0`).
pub fn log_variance(m: f64, exposure: f64, model: VarianceModel) -> Option<f64> {
    if !(m > 0.0 && exposure > 0.0) || !m.is_finite() || !exposure.is_finite() {
        return None;
    }
    match model {
        VarianceModel::Poisson => Some(1.0 / (m * exposure)),
        VarianceModel::Binomial => Some((1.0 - m) / (m * exposure)),
    }
}

/// Per-cell measurement variances and the derived fitting weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSurface {
    /// n x p; NaN where undefined.
    pub variances: DMatrix<f64>,
    /// n x p; `1 / variance`, or 0 where the variance is undefined.
    pub weights: DMatrix<f64>,
}

impl WeightSurface {
    pub fn from_series(series: &Series, model: VarianceModel) -> Self {
        let (n, p) = series.rates.shape();
        let mut variances = DMatrix::from_element(n, p, f64::NAN);
        let mut weights = DMatrix::zeros(n, p);
        for t in 0..n {
            for i in 0..p {
                if series.mask[(t, i)] {
                    continue;
                }
                if let Some(v) = log_variance(series.rates[(t, i)], series.exposures[(t, i)], model)
                {
                    // binomial variance vanishes at m = 1; treat as undefined
                    if v > 0.0 {
                        variances[(t, i)] = v;
                        weights[(t, i)] = 1.0 / v;
                    }
                }
            }
        }
        Self { variances, weights }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothConfig {
    pub alpha: f64,
    pub monotone_from: f64,
    pub variance_model: VarianceModel,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            monotone_from: DEFAULT_MONOTONE_FROM,
            variance_model: VarianceModel::Poisson,
        }
    }
}

/// Smoothed log mortality for one population.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSurface {
    pub label: String,
    /// n x p smoothed log rates.
    pub values: DMatrix<f64>,
    pub measurement: WeightSurface,
    pub alpha: f64,
    pub monotone_from: f64,
}

impl SmoothSurface {
    pub fn n_years(&self) -> usize {
        self.values.nrows()
    }

    fn head(&self, n: usize) -> SmoothSurface {
        let p = self.values.ncols();
        SmoothSurface {
            label: self.label.clone(),
            values: self.values.rows(0, n).into_owned(),
            measurement: WeightSurface {
                variances: self.measurement.variances.view((0, 0), (n, p)).into_owned(),
                weights: self.measurement.weights.view((0, 0), (n, p)).into_owned(),
            },
            alpha: self.alpha,
            monotone_from: self.monotone_from,
        }
    }
}

/// Smoothed surfaces for every population and the total.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedDataset {
    pub years: Vec<i32>,
    pub grid: AgeGrid,
    pub populations: Vec<SmoothSurface>,
    pub total: SmoothSurface,
}

impl SmoothedDataset {
    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.populations.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn all_surfaces(&self) -> impl Iterator<Item = &SmoothSurface> {
        self.populations.iter().chain(std::iter::once(&self.total))
    }

    /// Restrict to the first `n` years. Valid because each year is smoothed on its own.
    pub fn head(&self, n: usize) -> Result<SmoothedDataset> {
        if n == 0 || n > self.n_years() {
            return Err(Error::Input(format!(
                "cannot take {n} of {} years",
                self.n_years()
            )));
        }
        Ok(SmoothedDataset {
            years: self.years[..n].to_vec(),
            grid: self.grid.clone(),
            populations: self.populations.iter().map(|s| s.head(n)).collect(),
            total: self.total.head(n),
        })
    }
}

fn smooth_series(series: &Series, grid: &AgeGrid, years: &[i32], cfg: &SmoothConfig) -> Result<SmoothSurface> {
    let measurement = WeightSurface::from_series(series, cfg.variance_model);
    let (n, p) = series.rates.shape();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|t| {
            let y: Vec<f64> = (0..p)
                .map(|i| {
                    if measurement.weights[(t, i)] > 0.0 {
                        series.rates[(t, i)].ln()
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            let w: Vec<f64> = measurement.weights.row(t).iter().copied().collect();
            smooth_curve(&y, &w, grid.ages(), cfg.alpha, cfg.monotone_from)
                .map_err(|e| e.context(format!("population {} year {}", series.label, years[t])))
        })
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(n, p, |t, i| rows[t][i]);
    Ok(SmoothSurface {
        label: series.label.clone(),
        values,
        measurement,
        alpha: cfg.alpha,
        monotone_from: cfg.monotone_from,
    })
}

/// Smooth every year of every population (and the total) independently.
pub fn smooth_dataset(ds: &MortalityDataset, cfg: &SmoothConfig) -> Result<SmoothedDataset> {
    ds.validate()?;
    let populations = ds
        .populations
        .iter()
        .map(|s| smooth_series(s, &ds.grid, &ds.years, cfg))
        .collect::<Result<Vec<_>>>()?;
    let total = smooth_series(&ds.total, &ds.grid, &ds.years, cfg)?;
    Ok(SmoothedDataset {
        years: ds.years.clone(),
        grid: ds.grid.clone(),
        populations,
        total,
    })
}

/// Long-format CSV: `population,year,age,smoothed_log_rate,variance` (`.` for undefined variance).
pub fn to_csv(sm: &SmoothedDataset) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("population,year,age,smoothed_log_rate,variance\n");
    for s in sm.all_surfaces() {
        for (t, year) in sm.years.iter().enumerate() {
            for i in 0..sm.grid.len() {
                let v = s.measurement.variances[(t, i)];
                let var = if v.is_nan() { ".".to_string() } else { v.to_string() };
                let _ = writeln!(
                    out,
                    "{},{year},{},{},{var}",
                    s.label,
                    sm.grid.age_label(i),
                    s.values[(t, i)]
                );
            }
        }
    }
    out
}

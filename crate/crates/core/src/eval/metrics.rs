//! Point forecast errors and interval scores.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointMetrics {
    pub rmsfe: f64,
    pub max_rsfe: f64,
    pub mafe: f64,
    pub max_afe: f64,
    pub mfe: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointMetric {
    MaxAfe,
    MaxRsfe,
    Mafe,
    Rmsfe,
    Mfe,
}

impl PointMetric {
    /// Table order.
    pub const ALL: [PointMetric; 5] = [PointMetric::MaxAfe, PointMetric::MaxRsfe, PointMetric::Mafe, PointMetric::Rmsfe, PointMetric::Mfe];

    pub fn name(&self) -> &'static str {
        match self {
            PointMetric::MaxAfe => "Max AFE",
            PointMetric::MaxRsfe => "Max RSFE",
            PointMetric::Mafe => "MAFE",
            PointMetric::Rmsfe => "RMSFE",
            PointMetric::Mfe => "MFE",
        }
    }

    pub fn get(&self, m: &PointMetrics) -> f64 {
        match self {
            PointMetric::MaxAfe => m.max_afe,
            PointMetric::MaxRsfe => m.max_rsfe,
            PointMetric::Mafe => m.mafe,
            PointMetric::Rmsfe => m.rmsfe,
            PointMetric::Mfe => m.mfe,
        }
    }

    /// Size used to rank methods; the signed mean error is ranked by magnitude.
    pub fn badness(&self, value: f64) -> f64 {
        match self {
            PointMetric::Mfe => value.abs(),
            _ => value,
        }
    }
}

/// Summaries of the errors `actual - forecast`.
pub fn error_metrics(errors: &[f64]) -> Result<PointMetrics> {
    if errors.is_empty() {
        return Err(Error::Input("no forecast errors to summarize".into()));
    }
    let n = errors.len() as f64;
    let mut m = PointMetrics::default();
    let (mut sq, mut abs, mut sum) = (0.0, 0.0, 0.0);
    for &e in errors {
        sq += e * e;
        abs += e.abs();
        sum += e;
        m.max_afe = m.max_afe.max(e.abs());
        m.max_rsfe = m.max_rsfe.max(e * e);
    }
    m.rmsfe = (sq / n).sqrt();
    m.max_rsfe = m.max_rsfe.sqrt();
    m.mafe = abs / n;
    m.mfe = sum / n;
    Ok(m)
}

pub fn point_metrics(actual: &[f64], forecast: &[f64]) -> Result<PointMetrics> {
    if actual.len() != forecast.len() {
        return Err(crate::error::shape(format!("{} actuals against {} forecasts", actual.len(), forecast.len())));
    }
    let errors: Vec<f64> = actual.iter().zip(forecast).map(|(a, f)| a - f).collect();
    error_metrics(&errors)
}

/// Interval score of `[lower, upper]` for the observation `actual` at level `1 - alpha`.
pub fn interval_score(lower: f64, upper: f64, actual: f64, alpha: f64) -> Result<f64> {
    if lower > upper {
        return Err(Error::Input(format!("interval lower bound {lower} exceeds upper bound {upper}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Input(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut s = upper - lower;
    if actual < lower {
        s += 2.0 / alpha * (lower - actual);
    }
    if actual > upper {
        s += 2.0 / alpha * (actual - upper);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntervalMetrics {
    pub mean: f64,
    pub max: f64,
}

pub fn interval_metrics(scores: &[f64]) -> Result<IntervalMetrics> {
    if scores.is_empty() {
        return Err(Error::Input("no interval scores to summarize".into()));
    }
    Ok(IntervalMetrics {
        mean: scores.iter().sum::<f64>() / scores.len() as f64,
        max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

//! The fit-and-forecast chain shared by the command line and the evaluation harness.

use nalgebra::DVector;

use crate::error::Result;
use crate::multilevel::{decompose, MultilevelDecomposition};
use crate::scorecast::{forecast_all_scores, Method, ScoreForecasts};
use crate::smooth::SmoothedDataset;
use crate::uncertainty::{forecast_bundle, smoothing_sd, ForecastBundle, SMOOTHING_SD_YEARS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastSettings {
    pub lambda: f64,
    pub threshold: f64,
    pub method: Method,
    pub horizon: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for ForecastSettings {
    fn default() -> Self {
        Self {
            lambda: 1.81,
            threshold: crate::fpca::DEFAULT_VARIANCE_THRESHOLD,
            method: Method::Rwf,
            horizon: 30,
            replicates: crate::uncertainty::DEFAULT_REPLICATES,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub decomposition: MultilevelDecomposition,
    pub scores: ScoreForecasts,
    pub bundle: ForecastBundle,
}

/// Per-population smoothing-error scales from the last training years.
pub fn smoothing_scales(sm: &SmoothedDataset) -> Vec<DVector<f64>> {
    sm.populations.iter().map(|s| smoothing_sd(&s.measurement, SMOOTHING_SD_YEARS)).collect()
}

/// Score forecasts and bootstrap bundle for an existing decomposition.
pub fn forecast_decomposition(
    dec: &MultilevelDecomposition,
    sm: &SmoothedDataset,
    settings: &ForecastSettings,
) -> Result<(ScoreForecasts, ForecastBundle)> {
    let scores = forecast_all_scores(dec, settings.method, settings.horizon)?;
    let bundle = forecast_bundle(dec, &scores, &smoothing_scales(sm), settings.horizon, settings.replicates, settings.seed)?;
    Ok((scores, bundle))
}

/// Decompose smoothed data and forecast it.
pub fn fit_and_forecast(sm: &SmoothedDataset, settings: &ForecastSettings) -> Result<PipelineOutput> {
    let decomposition = decompose(sm, settings.lambda, settings.threshold)?;
    let (scores, bundle) = forecast_decomposition(&decomposition, sm, settings)?;
    Ok(PipelineOutput { decomposition, scores, bundle })
}

//! Additive-error exponential smoothing without seasonality: (A,N), (A,A), (A,Ad).

use super::optim::minimize;
use super::{FittedParams, Method, ScoreForecast};
use crate::error::{Error, Result};

pub const PHI_MIN: f64 = 0.8;
pub const PHI_MAX: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtsModel {
    /// Simple exponential smoothing, (A,N).
    Level,
    /// Holt's linear trend, (A,A).
    Trend,
    /// Damped trend, (A,Ad).
    DampedTrend,
}

impl EtsModel {
    pub const ALL: [EtsModel; 3] = [EtsModel::Level, EtsModel::Trend, EtsModel::DampedTrend];

    pub fn name(&self) -> &'static str {
        match self {
            EtsModel::Level => "ETS(A,N,N)",
            EtsModel::Trend => "ETS(A,A,N)",
            EtsModel::DampedTrend => "ETS(A,Ad,N)",
        }
    }

    /// Smoothing parameters and initial states, plus the innovation variance.
    fn num_params(&self) -> usize {
        match self {
            EtsModel::Level => 2 + 1,
            EtsModel::Trend => 4 + 1,
            EtsModel::DampedTrend => 5 + 1,
        }
    }

    fn has_trend(&self) -> bool {
        !matches!(self, EtsModel::Level)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtsFit {
    pub model: EtsModel,
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub initial_level: f64,
    pub initial_trend: f64,
    /// Final level and trend after filtering the data.
    pub level: f64,
    pub trend: f64,
    pub sigma2: f64,
    pub aicc: f64,
}

impl EtsFit {
    fn damping(&self) -> f64 {
        match self.model {
            EtsModel::Level => 0.0,
            EtsModel::Trend => 1.0,
            EtsModel::DampedTrend => self.phi,
        }
    }
}

/// One-step innovations and final states for fixed parameters.
fn filter(y: &[f64], model: EtsModel, alpha: f64, beta: f64, phi: f64, l0: f64, b0: f64) -> (f64, f64, f64) {
    let damp = match model {
        EtsModel::Level => 0.0,
        EtsModel::Trend => 1.0,
        EtsModel::DampedTrend => phi,
    };
    let (mut l, mut b) = (l0, if model.has_trend() { b0 } else { 0.0 });
    let mut sse = 0.0;
    for &obs in y {
        let fc = l + damp * b;
        let e = obs - fc;
        sse += e * e;
        l = fc + alpha * e;
        if model.has_trend() {
            b = damp * b + beta * e;
        }
    }
    (sse, l, b)
}

fn admissible(model: EtsModel, alpha: f64, beta: f64, phi: f64) -> bool {
    let ok_alpha = alpha > 0.0 && alpha < 1.0;
    match model {
        EtsModel::Level => ok_alpha,
        EtsModel::Trend => ok_alpha && beta > 0.0 && beta < alpha,
        EtsModel::DampedTrend => ok_alpha && beta > 0.0 && beta < alpha && (PHI_MIN..=PHI_MAX).contains(&phi),
    }
}

fn aicc(sse: f64, n: usize, k: usize) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    let sigma2 = sse / nf;
    let loglik = -0.5 * nf * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    -2.0 * loglik + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0)
}

/// Filter the data through a model with given parameters.
pub fn ets_fixed(y: &[f64], model: EtsModel, alpha: f64, beta: f64, phi: f64, l0: f64, b0: f64) -> Result<EtsFit> {
    if y.is_empty() {
        return Err(Error::Input("empty series".into()));
    }
    let (sse, level, trend) = filter(y, model, alpha, beta, phi, l0, b0);
    let n = y.len();
    Ok(EtsFit {
        model,
        alpha,
        beta,
        phi,
        initial_level: l0,
        initial_trend: b0,
        level,
        trend,
        sigma2: sse / n as f64,
        aicc: if n > model.num_params() + 1 { aicc(sse, n, model.num_params()) } else { f64::INFINITY },
    })
}

fn fit_model(y: &[f64], model: EtsModel, scale: f64) -> Option<EtsFit> {
    let n = y.len();
    let k = model.num_params();
    if n <= k + 1 {
        return None;
    }
    let m = y.len().min(10);
    let l_start = y[..m].iter().sum::<f64>() / m as f64;
    let b_start = if m >= 2 { (y[m - 1] - y[0]) / (m - 1) as f64 } else { 0.0 };
    let unpack = |x: &[f64]| -> (f64, f64, f64, f64, f64) {
        match model {
            EtsModel::Level => (x[0], 0.0, 0.0, x[1], 0.0),
            EtsModel::Trend => (x[0], x[1], 1.0, x[2], x[3]),
            EtsModel::DampedTrend => (x[0], x[1], x[2], x[3], x[4]),
        }
    };
    let objective = |x: &[f64]| {
        let (a, b, p, l0, b0) = unpack(x);
        if !admissible(model, a, b, p) {
            return f64::INFINITY;
        }
        filter(y, model, a, b, p, l0, b0).0
    };
    let step = 0.1 * scale.max(1e-12);
    let (start, steps) = match model {
        EtsModel::Level => (vec![0.5, l_start], vec![0.2, step]),
        EtsModel::Trend => (vec![0.5, 0.05, l_start, b_start], vec![0.2, 0.03, step, 0.1 * step]),
        EtsModel::DampedTrend => (
            vec![0.5, 0.05, 0.9, l_start, b_start],
            vec![0.2, 0.03, 0.04, step, 0.1 * step],
        ),
    };
    let (x, sse) = minimize(objective, &start, &steps).ok()?;
    if !(sse > 0.0) {
        return None;
    }
    let (a, b, p, l0, b0) = unpack(&x);
    ets_fixed(y, model, a, b, p, l0, b0).ok()
}

/// Choose among (A,N), (A,A) and (A,Ad) by AICc.
pub fn auto_ets(y: &[f64]) -> Result<EtsFit> {
    let n = y.len();
    if n < 10 {
        return Err(Error::Input(format!("ets needs at least 10 observations, got {n}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("series contains non-finite values".into()));
    }
    let m = crate::stats::mean(y);
    let scale = crate::stats::variance_about(y, m).sqrt();
    let amax = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale <= 1e-12 * (1.0 + amax) {
        // constant series: every model reproduces it
        return ets_fixed(y, EtsModel::Level, 0.5, 0.0, 0.0, y[0], 0.0);
    }
    EtsModel::ALL
        .iter()
        .filter_map(|&model| fit_model(y, model, scale))
        .min_by(|a, b| a.aicc.total_cmp(&b.aicc))
        .ok_or_else(|| Error::Numerical("no exponential smoothing model could be fitted".into()))
}

pub fn ets_forecast(fit: &EtsFit, horizon: usize) -> (Vec<f64>, Vec<f64>) {
    let damp = fit.damping();
    let mut point = Vec::with_capacity(horizon);
    let mut variance = Vec::with_capacity(horizon);
    let mut cum_damp = 0.0; // phi + ... + phi^h
    let mut pow = 1.0;
    let mut sum_c2 = 0.0;
    for _ in 0..horizon {
        pow *= damp;
        cum_damp += pow;
        point.push(fit.level + cum_damp * fit.trend);
        variance.push(fit.sigma2 * (1.0 + sum_c2));
        // c_h enters the variance from step h + 1 onwards
        let c = fit.alpha + if fit.model.has_trend() { fit.beta * cum_damp } else { 0.0 };
        sum_c2 += c * c;
    }
    (point, variance)
}

pub fn ets(y: &[f64], horizon: usize) -> Result<ScoreForecast> {
    let (fit, warning) = match auto_ets(y) {
        Ok(f) => (f, None),
        Err(Error::Numerical(msg)) => (
            ets_fixed(y, EtsModel::Level, 0.5, 0.0, 0.0, y[0], 0.0)?,
            Some(format!("{msg}; used ETS(A,N,N) with alpha = 0.5")),
        ),
        Err(e) => return Err(e),
    };
    let (point, variance) = ets_forecast(&fit, horizon);
    let long_run_slope = match fit.model {
        EtsModel::Trend => fit.trend,
        _ => 0.0,
    };
    Ok(ScoreForecast {
        method: Method::Ets,
        point,
        variance,
        long_run_slope,
        params: FittedParams::Ets(fit),
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_series_is_forecast_flat() {
        let f = ets(&[4.25; 15], 5).unwrap();
        assert_eq!(f.point, vec![4.25; 5]);
        assert!(f.variance.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn alpha_one_is_naive() {
        let y = [1.0, 3.0, 2.0, 5.0, 4.5, 6.0];
        let fit = ets_fixed(&y, EtsModel::Level, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let (point, _) = ets_forecast(&fit, 3);
        assert_eq!(point, vec![6.0; 3]);
    }

    #[test]
    fn variance_formula_for_holt() {
        let fit = EtsFit {
            model: EtsModel::Trend,
            alpha: 0.5,
            beta: 0.1,
            phi: 1.0,
            initial_level: 0.0,
            initial_trend: 0.0,
            level: 2.0,
            trend: 1.0,
            sigma2: 2.0,
            aicc: 0.0,
        };
        let (point, var) = ets_forecast(&fit, 3);
        assert_eq!(point, vec![3.0, 4.0, 5.0]);
        let c1: f64 = 0.5 + 0.1;
        let c2: f64 = 0.5 + 0.2;
        assert!((var[0] - 2.0).abs() < 1e-14);
        assert!((var[1] - 2.0 * (1.0 + c1 * c1)).abs() < 1e-14);
        assert!((var[2] - 2.0 * (1.0 + c1 * c1 + c2 * c2)).abs() < 1e-14);
    }

    #[test]
    fn level_shift_moves_forecasts() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let d = Normal::new(0.0, 1.0).unwrap();
        let y: Vec<f64> = (0..40).map(|t| (t as f64 * 0.3).sin() + 0.3 * d.sample(&mut rng)).collect();
        let a = ets(&y, 4).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v + 10.0).collect();
        let b = ets(&ys, 4).unwrap();
        for (p, q) in a.point.iter().zip(&b.point) {
            assert!((q - p - 10.0).abs() < 1e-6, "{p} {q}");
        }
    }

    #[test]
    fn local_level_prefers_simple_smoothing() {
        let d = Normal::new(0.0, 1.0).unwrap();
        let mut wins = 0;
        for seed in 0..100 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 + seed);
            let mut level = 0.0;
            let y: Vec<f64> = (0..60)
                .map(|_| {
                    level += 0.5 * d.sample(&mut rng);
                    level + d.sample(&mut rng)
                })
                .collect();
            let scale = crate::stats::variance_about(&y, crate::stats::mean(&y)).sqrt();
            let level_fit = fit_model(&y, EtsModel::Level, scale).unwrap();
            let trend_fit = fit_model(&y, EtsModel::Trend, scale).unwrap();
            if level_fit.aicc < trend_fit.aicc {
                wins += 1;
            }
        }
        assert!(wins >= 80, "{wins}");
    }
}

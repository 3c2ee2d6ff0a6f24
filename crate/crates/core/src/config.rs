//! Run configuration: a flat `key = value` file, environment overrides and
//! command-line overrides, applied in that order.

use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{EvalConfig, DEFAULT_LAMBDAS};
use crate::pipeline::ForecastSettings;
use crate::scorecast::Method;
use crate::smooth::{SmoothConfig, VarianceModel};
use crate::synth::{ScoreProcess, SynthConfig};
use crate::uncertainty::format_lambda;

/// Environment variables `MORTCAST_<KEY>` override file values.
pub const ENV_PREFIX: &str = "MORTCAST_";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub rates: Option<PathBuf>,
    pub exposures: Option<PathBuf>,
    /// Canonical long-format dataset.
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub age_min: f64,
    pub age_max: f64,
    pub alpha: f64,
    pub monotone_from: f64,
    pub variance_model: VarianceModel,
    pub lambda: f64,
    pub threshold: f64,
    pub method: Method,
    pub horizon: usize,
    pub replicates: usize,
    pub seed: u64,
    pub interval_alpha: f64,
    pub test_len: usize,
    pub lambdas: Vec<f64>,
    pub methods: Vec<Method>,
    /// Simulation settings; `scores` and `seed` are taken from the fields below.
    pub synth: SynthConfig,
    /// `linear` or `ar1`.
    pub sim_scores: String,
    pub sim_drift_noise: f64,
    pub sim_phi: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let smooth = SmoothConfig::default();
        let f = ForecastSettings::default();
        Self {
            rates: None,
            exposures: None,
            data: None,
            out: None,
            age_min: 0.0,
            age_max: 100.0,
            alpha: smooth.alpha,
            monotone_from: smooth.monotone_from,
            variance_model: smooth.variance_model,
            lambda: f.lambda,
            threshold: f.threshold,
            method: f.method,
            horizon: f.horizon,
            replicates: f.replicates,
            seed: f.seed,
            interval_alpha: 0.2,
            test_len: 30,
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            methods: Method::ALL.to_vec(),
            synth: SynthConfig::default(),
            sim_scores: "linear".into(),
            sim_drift_noise: 0.5,
            sim_phi: 0.8,
        }
    }
}

fn bad(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| bad(key, format!("cannot parse `{value}`")))
}

fn lambda_value(key: &str, value: &str) -> Result<f64> {
    match value.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        v => num(key, v),
    }
}

fn list<T>(key: &str, value: &str, parse: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

/// Every recognised key, in canonical order.
pub const KEYS: &[&str] = &[
    "rates",
    "exposures",
    "data",
    "out",
    "age_min",
    "age_max",
    "alpha",
    "monotone_from",
    "variance_model",
    "lambda",
    "threshold",
    "method",
    "horizon",
    "replicates",
    "seed",
    "interval_alpha",
    "test_len",
    "lambdas",
    "methods",
    "sim_years",
    "sim_ages",
    "sim_horizon",
    "sim_first_year",
    "sim_populations",
    "sim_common_eigenvalues",
    "sim_residual_eigenvalues",
    "sim_scores",
    "sim_drift_noise",
    "sim_phi",
    "sim_standardize",
    "sim_outlier_fraction",
    "sim_outlier_magnitude",
    "sim_noise_variance",
    "sim_exposure",
];

impl RunConfig {
    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let v = value.trim();
        let path = || if v.is_empty() { None } else { Some(PathBuf::from(v)) };
        match key {
            "rates" => self.rates = path(),
            "exposures" => self.exposures = path(),
            "data" => self.data = path(),
            "out" => self.out = path(),
            "age_min" => self.age_min = num(key, v)?,
            "age_max" => self.age_max = num(key, v)?,
            "alpha" => self.alpha = num(key, v)?,
            "monotone_from" => self.monotone_from = lambda_value(key, v)?,
            "variance_model" => self.variance_model = v.parse().map_err(|e: Error| bad(key, e.to_string()))?,
            "lambda" => self.lambda = lambda_value(key, v)?,
            "threshold" => self.threshold = num(key, v)?,
            "method" => self.method = v.parse().map_err(|e: Error| bad(key, e.to_string()))?,
            "horizon" => self.horizon = num(key, v)?,
            "replicates" => self.replicates = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "interval_alpha" => self.interval_alpha = num(key, v)?,
            "test_len" => self.test_len = num(key, v)?,
            "lambdas" => self.lambdas = list(key, v, lambda_value)?,
            "methods" => self.methods = list(key, v, |k, s| s.parse().map_err(|e: Error| bad(k, e.to_string())))?,
            "sim_years" => self.synth.n = num(key, v)?,
            "sim_ages" => self.synth.p = num(key, v)?,
            "sim_horizon" => self.synth.horizon = num(key, v)?,
            "sim_first_year" => self.synth.first_year = num(key, v)?,
            "sim_populations" => self.synth.populations = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            "sim_common_eigenvalues" => self.synth.common_eigenvalues = list(key, v, num)?,
            "sim_residual_eigenvalues" => self.synth.residual_eigenvalues = list(key, v, num)?,
            "sim_scores" => {
                let kind = v.to_ascii_lowercase();
                if kind != "linear" && kind != "ar1" {
                    return Err(bad(key, format!("expected linear or ar1, got `{v}`")));
                }
                self.sim_scores = kind;
            }
            "sim_drift_noise" => self.sim_drift_noise = num(key, v)?,
            "sim_phi" => self.sim_phi = num(key, v)?,
            "sim_standardize" => self.synth.standardize = num(key, v)?,
            "sim_outlier_fraction" => self.synth.outlier_fraction = num(key, v)?,
            "sim_outlier_magnitude" => self.synth.outlier_magnitude = num(key, v)?,
            "sim_noise_variance" => self.synth.noise_variance = num(key, v)?,
            "sim_exposure" => {
                self.synth.exposure = match lambda_value(key, v)? {
                    e if e.is_infinite() => None,
                    e => Some(e),
                }
            }
            _ => return Err(bad(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Current value of a key as text, in the same syntax `set` accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        let floats = |v: &[f64]| join(v, |x| x.to_string());
        Some(match key {
            "rates" => path(&self.rates),
            "exposures" => path(&self.exposures),
            "data" => path(&self.data),
            "out" => path(&self.out),
            "age_min" => self.age_min.to_string(),
            "age_max" => self.age_max.to_string(),
            "alpha" => self.alpha.to_string(),
            "monotone_from" => format_lambda(self.monotone_from),
            "variance_model" => self.variance_model.to_string(),
            "lambda" => format_lambda(self.lambda),
            "threshold" => self.threshold.to_string(),
            "method" => self.method.to_string(),
            "horizon" => self.horizon.to_string(),
            "replicates" => self.replicates.to_string(),
            "seed" => self.seed.to_string(),
            "interval_alpha" => self.interval_alpha.to_string(),
            "test_len" => self.test_len.to_string(),
            "lambdas" => join(&self.lambdas, |l| format_lambda(*l)),
            "methods" => join(&self.methods, |m| m.to_string()),
            "sim_years" => self.synth.n.to_string(),
            "sim_ages" => self.synth.p.to_string(),
            "sim_horizon" => self.synth.horizon.to_string(),
            "sim_first_year" => self.synth.first_year.to_string(),
            "sim_populations" => self.synth.populations.join(","),
            "sim_common_eigenvalues" => floats(&self.synth.common_eigenvalues),
            "sim_residual_eigenvalues" => floats(&self.synth.residual_eigenvalues),
            "sim_scores" => self.sim_scores.clone(),
            "sim_drift_noise" => self.sim_drift_noise.to_string(),
            "sim_phi" => self.sim_phi.to_string(),
            "sim_standardize" => self.synth.standardize.to_string(),
            "sim_outlier_fraction" => self.synth.outlier_fraction.to_string(),
            "sim_outlier_magnitude" => self.synth.outlier_magnitude.to_string(),
            "sim_noise_variance" => self.synth.noise_variance.to_string(),
            "sim_exposure" => self.synth.exposure.map_or("inf".into(), |e| e.to_string()),
            _ => return None,
        })
    }

    /// Apply a `key = value` file. Blank lines and lines starting with `#` are ignored.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse { line: i + 1, message: "expected `key = value`".into() })?;
            self.set(k, v).map_err(|e| e.context(format!("config line {}", i + 1)))?;
        }
        Ok(())
    }

    /// Apply `MORTCAST_<KEY>` variables from the given environment.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<()> {
        let mut found: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.to_ascii_lowercase(), v)))
            .filter(|(k, _)| KEYS.contains(&k.as_str()))
            .collect();
        found.sort();
        for (k, v) in found {
            self.set(&k, &v).map_err(|e| e.context(format!("environment variable {ENV_PREFIX}{}", k.to_ascii_uppercase())))?;
        }
        Ok(())
    }

    /// The configuration as `key = value` lines in canonical order.
    pub fn to_text(&self) -> String {
        KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k).unwrap_or_default())).collect()
    }

    /// SHA-256 over every setting except the output directory.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for k in KEYS.iter().filter(|k| **k != "out") {
            h.update(format!("{k}={}\n", self.get(k).unwrap_or_default()).as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn smooth_config(&self) -> SmoothConfig {
        SmoothConfig { alpha: self.alpha, monotone_from: self.monotone_from, variance_model: self.variance_model }
    }

    pub fn forecast_settings(&self) -> ForecastSettings {
        ForecastSettings {
            lambda: self.lambda,
            threshold: self.threshold,
            method: self.method,
            horizon: self.horizon,
            replicates: self.replicates,
            seed: self.seed,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            smooth: self.smooth_config(),
            lambdas: self.lambdas.clone(),
            methods: self.methods.clone(),
            threshold: self.threshold,
            replicates: self.replicates,
            seed: self.seed,
            test_len: self.test_len,
            alpha: self.interval_alpha,
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        let scores = if self.sim_scores == "ar1" {
            ScoreProcess::Ar1 { phi: self.sim_phi }
        } else {
            ScoreProcess::LinearDrift { noise: self.sim_drift_noise }
        };
        SynthConfig { scores, seed: self.seed, ..self.synth.clone() }
    }

    /// Range checks shared by every command.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(bad("alpha", "must be a non-negative number"));
        }
        if self.age_min >= self.age_max {
            return Err(bad("age_max", format!("must exceed age_min ({})", self.age_min)));
        }
        if !(self.lambda > 0.0) {
            return Err(bad("lambda", "must be positive (use inf for the standard method)"));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0)) {
            return Err(bad("lambdas", format!("{l} is not positive")));
        }
        if self.lambdas.is_empty() {
            return Err(bad("lambdas", "need at least one value"));
        }
        if self.methods.is_empty() {
            return Err(bad("methods", "need at least one method"));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(bad("threshold", "must lie in (0, 1]"));
        }
        if self.horizon == 0 {
            return Err(bad("horizon", "must be at least 1"));
        }
        if self.replicates < 100 {
            return Err(bad("replicates", "must be at least 100"));
        }
        if !(self.interval_alpha > 0.0 && self.interval_alpha < 1.0) {
            return Err(bad("interval_alpha", "must lie in (0, 1)"));
        }
        if self.test_len == 0 {
            return Err(bad("test_len", "must be at least 1"));
        }
        if !(self.sim_drift_noise >= 0.0) {
            return Err(bad("sim_drift_noise", "must be non-negative"));
        }
        if !(self.sim_phi.abs() < 1.0) {
            return Err(bad("sim_phi", "must lie strictly between -1 and 1"));
        }
        Ok(())
    }

    /// The path stored under `key`, or a configuration error naming it.
    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        let p = match key {
            "rates" => &self.rates,
            "exposures" => &self.exposures,
            "data" => &self.data,
            "out" => &self.out,
            _ => return Err(bad(key, "not a path setting")),
        };
        p.clone().ok_or_else(|| bad(key, "is required for this command"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.alpha, c.monotone_from, c.lambda, c.threshold), (10.0, 65.0, 1.81, 0.9));
        assert_eq!((c.horizon, c.replicates, c.interval_alpha, c.test_len), (30, 1000, 0.2, 30));
        c.validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.apply_file("# comment\nlambda = inf\nmethods = arima, ets\nsim_scores = ar1\nsim_exposure = inf\n").unwrap();
        assert!(c.lambda.is_infinite());
        assert_eq!(c.methods, vec![Method::Arima, Method::Ets]);
        let mut d = RunConfig::default();
        d.apply_file(&c.to_text()).unwrap();
        assert_eq!(c, d);
        assert_eq!(c.hash(), d.hash());
        assert!(matches!(d.synth_config().scores, ScoreProcess::Ar1 { .. }));
        assert_eq!(d.synth_config().exposure, None);
    }

    #[test]
    fn hash_tracks_meaningful_fields() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.set("seed", "2").unwrap();
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.set("lambda", "1.810").unwrap();
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn env_overrides_and_errors_name_fields() {
        let mut c = RunConfig::default();
        c.apply_env([("MORTCAST_SEED".to_string(), "42".to_string()), ("PATH".into(), "/bin".into())]).unwrap();
        assert_eq!(c.seed, 42);
        let err = c.set("horizon", "soon").unwrap_err();
        assert!(err.to_string().contains("horizon"));
        assert!(c.set("colour", "blue").is_err());
        assert!(c.require_path("exposures").unwrap_err().to_string().contains("exposures"));
        assert!(c.apply_file("lambda 3").is_err());
    }
}

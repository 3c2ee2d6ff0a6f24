//! Seeded synthetic multilevel mortality data with known ground truth.
//!
//! Log mortality is built as
//! `f^j_t(x) = mu(x) + eta^j(x) + sum_k beta_tk phi_k(x) + sum_l gamma^j_tl psi^j_l(x) + e^j_t(x)`
//! with cosine bases orthonormalized on the age grid. Observed rates add Poisson
//! noise through exposures, and a chosen share of years receives an additive shock.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpca::{inner, EigenDecomposition};
use crate::ingest::{AgeGrid, MortalityDataset, Series, TOTAL_LABEL};
use crate::multilevel::MultilevelDecomposition;

/// Exposure used for noise-free rates.
pub const NOISE_FREE_EXPOSURE: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreProcess {
    /// Deterministic linear trend plus random-walk innovations with standard
    /// deviation `noise` times the per-year drift.
    LinearDrift { noise: f64 },
    /// Stationary AR(1) with the component eigenvalue as its marginal variance.
    Ar1 { phi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub p: usize,
    /// Future years generated beyond the sample.
    pub horizon: usize,
    pub first_year: i32,
    pub populations: Vec<String>,
    /// Score variances of the common components; its length is the true K.
    pub common_eigenvalues: Vec<f64>,
    /// Score variances of each population's residual components; its length is the true L.
    pub residual_eigenvalues: Vec<f64>,
    pub scores: ScoreProcess,
    /// Rescale sample scores to exactly zero mean, zero correlation and the configured variances.
    pub standardize: bool,
    pub outlier_fraction: f64,
    /// Shock size as a multiple of the common signal scale.
    pub outlier_magnitude: f64,
    /// Variance of the model error `e^j_t(x)`.
    pub noise_variance: f64,
    /// Exposure per cell; `None` gives noise-free rates.
    pub exposure: Option<f64>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 88,
            p: 101,
            horizon: 30,
            first_year: 1922,
            populations: vec!["F".into(), "M".into()],
            common_eigenvalues: vec![25.0, 2.0],
            residual_eigenvalues: vec![1.0, 0.2],
            scores: ScoreProcess::LinearDrift { noise: 0.5 },
            standardize: false,
            outlier_fraction: 0.0,
            outlier_magnitude: 10.0,
            noise_variance: 1e-4,
            exposure: Some(1e6),
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| Err(Error::Config { field: field.into(), message });
        if self.n < 4 {
            return bad("n", format!("need at least 4 years, got {}", self.n));
        }
        if self.p < 2 {
            return bad("p", format!("need at least 2 ages, got {}", self.p));
        }
        if self.populations.len() < 2 {
            return bad("populations", "need at least 2 populations".into());
        }
        if self.common_eigenvalues.is_empty() || self.common_eigenvalues.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("common_eigenvalues", "need at least one positive finite value".into());
        }
        if self.residual_eigenvalues.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("residual_eigenvalues", "values must be positive and finite".into());
        }
        let needed = self.common_eigenvalues.len() + self.populations.len() * self.residual_eigenvalues.len();
        if needed > self.p {
            return bad("p", format!("{needed} orthogonal basis functions do not fit on {} ages", self.p));
        }
        if !(0.0..0.5).contains(&self.outlier_fraction) {
            return bad("outlier_fraction", format!("must lie in [0, 0.5), got {}", self.outlier_fraction));
        }
        if !(self.outlier_magnitude >= 0.0 && self.outlier_magnitude.is_finite()) {
            return bad("outlier_magnitude", "must be non-negative".into());
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return bad("noise_variance", "must be non-negative".into());
        }
        if let Some(e) = self.exposure {
            if !(e > 0.0 && e.is_finite()) {
                return bad("exposure", format!("must be positive, got {e}"));
            }
        }
        match self.scores {
            ScoreProcess::Ar1 { phi } if !(phi.abs() < 1.0) => bad("scores", format!("AR(1) coefficient {phi} is not stationary")),
            ScoreProcess::LinearDrift { noise } if !(noise >= 0.0 && noise.is_finite()) => bad("scores", "drift noise must be non-negative".into()),
            _ => Ok(()),
        }
    }

    pub fn contaminated_count(&self) -> usize {
        (self.outlier_fraction * self.n as f64).ceil() as usize
    }
}

/// The mean log-mortality schedule.
pub fn baseline(age: f64) -> f64 {
    -9.0 + 0.085 * age + 2.5 * (-age / 3.0).exp()
}

/// `count` cosine curves of increasing frequency, orthonormalized on the grid.
pub fn cosine_basis(grid: &AgeGrid, count: usize) -> Result<DMatrix<f64>> {
    let ages = grid.ages();
    let q = grid.trapezoid_weights();
    let (lo, hi) = (ages[0], ages[ages.len() - 1]);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    for k in 0..count {
        let mut v: Vec<f64> = ages.iter().map(|a| (k as f64 * std::f64::consts::PI * (a - lo) / (hi - lo)).cos()).collect();
        // two passes of Gram-Schmidt keep round-off orthogonality tight
        for _ in 0..2 {
            for b in &basis {
                let c = inner(&q, &v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = inner(&q, &v, &v).sqrt();
        if !(norm > 1e-8) {
            return Err(Error::Input(format!("cosine {k} is dependent on lower frequencies on this grid")));
        }
        basis.push(v.iter().map(|x| x / norm).collect());
    }
    Ok(DMatrix::from_fn(ages.len(), count, |i, k| basis[k][i]))
}

/// Simulate `n + horizon` scores for each variance; returns (in-sample, future).
fn simulate_scores(
    rng: &mut ChaCha8Rng,
    variances: &[f64],
    process: ScoreProcess,
    n: usize,
    horizon: usize,
    sign: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let total = n + horizon;
    let mut all = DMatrix::zeros(total, variances.len());
    let tbar = (n as f64 - 1.0) / 2.0;
    let var_t = n as f64 * (n as f64 + 1.0) / 12.0;
    for (k, &lambda) in variances.iter().enumerate() {
        match process {
            ScoreProcess::LinearDrift { noise } => {
                let c = (lambda / var_t).sqrt();
                let mut walk = 0.0;
                for t in 0..total {
                    if t > 0 {
                        let z: f64 = StandardNormal.sample(rng);
                        walk += noise * c * z;
                    }
                    all[(t, k)] = -sign * c * (t as f64 - tbar) + walk;
                }
            }
            ScoreProcess::Ar1 { phi } => {
                let innov = (lambda * (1.0 - phi * phi)).sqrt();
                let z: f64 = StandardNormal.sample(rng);
                let mut prev = lambda.sqrt() * z;
                for t in 0..total {
                    if t > 0 {
                        let z: f64 = StandardNormal.sample(rng);
                        prev = phi * prev + innov * z;
                    }
                    all[(t, k)] = prev;
                }
            }
        }
    }
    (all.rows(0, n).into_owned(), all.rows(n, horizon).into_owned())
}

/// Affine map making the in-sample columns exactly centered, uncorrelated and of
/// the given sample variances; the same map is applied to the future rows.
fn standardize(sample: &mut DMatrix<f64>, future: &mut DMatrix<f64>, variances: &[f64]) -> Result<()> {
    let n = sample.nrows();
    let k = sample.ncols();
    let means: Vec<f64> = (0..k).map(|c| sample.column(c).mean()).collect();
    let center = |m: &mut DMatrix<f64>| {
        for c in 0..k {
            m.column_mut(c).add_scalar_mut(-means[c]);
        }
    };
    center(sample);
    center(future);
    for c in 0..k {
        for _ in 0..2 {
            for prev in 0..c {
                let coef = sample.column(c).dot(&sample.column(prev)) / sample.column(prev).norm_squared();
                let (s_prev, f_prev) = (sample.column(prev).into_owned(), future.column(prev).into_owned());
                sample.column_mut(c).axpy(-coef, &s_prev, 1.0);
                future.column_mut(c).axpy(-coef, &f_prev, 1.0);
            }
        }
        let var = sample.column(c).norm_squared() / (n - 1) as f64;
        if !(var > 1e-20) {
            return Err(Error::Input("score series are linearly dependent and cannot be standardized".into()));
        }
        let scale = (variances[c] / var).sqrt();
        sample.column_mut(c).scale_mut(scale);
        future.column_mut(c).scale_mut(scale);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    /// Exact parameters; `curves` hold the clean surfaces before shocks and measurement noise.
    pub decomposition: MultilevelDecomposition,
    /// Clean total curves, `mu + sum_k beta phi + e^T`.
    pub total: DMatrix<f64>,
    pub future_common_scores: DMatrix<f64>,
    pub future_residual_scores: Vec<DMatrix<f64>>,
    /// Per population, H x p clean log mortality for the future years.
    pub future_curves: Vec<DMatrix<f64>>,
    pub contaminated_years: Vec<i32>,
    /// Additive log-scale shock applied in contaminated years.
    pub shock: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub config: SynthConfig,
    /// Observed sample.
    pub dataset: MortalityDataset,
    /// Observed future years (no shocks).
    pub future: MortalityDataset,
    pub truth: SynthTruth,
}

fn observe(rng: &mut ChaCha8Rng, log_rates: &DMatrix<f64>, exposure: Option<f64>, label: &str) -> Result<Series> {
    let (n, p) = log_rates.shape();
    let mut rates = DMatrix::zeros(n, p);
    let level = exposure.unwrap_or(NOISE_FREE_EXPOSURE);
    for t in 0..n {
        for i in 0..p {
            let m = log_rates[(t, i)].exp();
            rates[(t, i)] = match exposure {
                None => m,
                Some(e) => {
                    let pois = Poisson::new(m * e).map_err(|err| Error::Numerical(format!("death count draw: {err}")))?;
                    pois.sample(rng) / e
                }
            };
        }
    }
    Ok(Series {
        label: label.into(),
        rates,
        exposures: DMatrix::from_element(n, p, level),
        mask: DMatrix::from_element(n, p, false),
    })
}

fn eigen(mean: DVector<f64>, basis: DMatrix<f64>, scores: DMatrix<f64>, eigenvalues: &[f64], weights: Vec<bool>) -> EigenDecomposition {
    EigenDecomposition {
        mean,
        basis,
        scores,
        eigenvalues: eigenvalues.to_vec(),
        spectrum: eigenvalues.to_vec(),
        total_variance: eigenvalues.iter().sum(),
        obs_weights: weights,
        integrated_errors: Vec::new(),
    }
}

/// Generate a dataset, its observed future and the ground truth.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let (n, p, h) = (cfg.n, cfg.p, cfg.horizon);
    let n_pop = cfg.populations.len();
    let (k_true, l_true) = (cfg.common_eigenvalues.len(), cfg.residual_eigenvalues.len());
    let grid = AgeGrid::single_years(0, (p - 1) as u32, true)?;
    let ages = grid.ages().to_vec();
    let q = grid.trapezoid_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let all_basis = cosine_basis(&grid, k_true + n_pop * l_true)?;
    let phi = all_basis.columns(0, k_true).into_owned();
    let psi: Vec<DMatrix<f64>> = (0..n_pop).map(|j| all_basis.columns(k_true + j * l_true, l_true).into_owned()).collect();

    let mu = DVector::from_iterator(p, ages.iter().map(|a| baseline(*a)));
    let top = ages[p - 1].max(1.0);
    let eta: Vec<DVector<f64>> = (0..n_pop)
        .map(|j| {
            let a = j as f64 - (n_pop as f64 - 1.0) / 2.0;
            DVector::from_iterator(p, ages.iter().map(|x| a * (0.4 - 0.3 * x / top)))
        })
        .collect();

    let (mut beta, mut beta_future) = simulate_scores(&mut rng, &cfg.common_eigenvalues, cfg.scores, n, h, 1.0);
    if cfg.standardize {
        standardize(&mut beta, &mut beta_future, &cfg.common_eigenvalues)?;
    }
    let mut gamma = Vec::with_capacity(n_pop);
    let mut gamma_future = Vec::with_capacity(n_pop);
    for j in 0..n_pop {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let (mut g, mut gf) = if l_true == 0 {
            (DMatrix::zeros(n, 0), DMatrix::zeros(h, 0))
        } else {
            simulate_scores(&mut rng, &cfg.residual_eigenvalues, cfg.scores, n, h, sign)
        };
        if cfg.standardize && l_true > 0 {
            standardize(&mut g, &mut gf, &cfg.residual_eigenvalues)?;
        }
        gamma.push(g);
        gamma_future.push(gf);
    }

    let sd = cfg.noise_variance.sqrt();
    let noise = Normal::new(0.0, sd).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut draw_error = |rows: usize| DMatrix::from_fn(rows, p, |_, _| if sd > 0.0 { noise.sample(&mut rng) } else { 0.0 });

    let common_part = |b: &DMatrix<f64>| {
        let mut m = b * phi.transpose();
        for mut row in m.row_iter_mut() {
            row += mu.transpose();
        }
        m
    };
    let total = common_part(&beta) + draw_error(n);
    let total_future = common_part(&beta_future) + draw_error(h);
    let mut curves = Vec::with_capacity(n_pop);
    let mut future_curves = Vec::with_capacity(n_pop);
    for j in 0..n_pop {
        let build = |b: &DMatrix<f64>, g: &DMatrix<f64>| {
            let mut m = common_part(b) + g * psi[j].transpose();
            for mut row in m.row_iter_mut() {
                row += eta[j].transpose();
            }
            m
        };
        curves.push(build(&beta, &gamma[j]) + draw_error(n));
        future_curves.push(build(&beta_future, &gamma_future[j]) + draw_error(h));
    }

    // year-level shocks shaped like an excess-mortality hump over young adult ages
    let m = cfg.contaminated_count();
    let mut picked = rand::seq::index::sample(&mut rng, n, m).into_vec();
    picked.sort_unstable();
    let raw: Vec<f64> = ages.iter().map(|x| (-((x / top - 0.3) / 0.15).powi(2)).exp()).collect();
    let norm = inner(&q, &raw, &raw).sqrt();
    let signal = cfg.common_eigenvalues.iter().sum::<f64>().sqrt();
    let shock = DVector::from_iterator(p, raw.iter().map(|v| v / norm * cfg.outlier_magnitude * signal));
    let shocked = |c: &DMatrix<f64>| {
        let mut c = c.clone();
        for &t in &picked {
            let mut row = c.row_mut(t);
            row += shock.transpose();
        }
        c
    };

    let years: Vec<i32> = (0..n as i32).map(|t| cfg.first_year + t).collect();
    let future_years: Vec<i32> = (0..h as i32).map(|t| cfg.first_year + n as i32 + t).collect();
    let mut populations = Vec::with_capacity(n_pop);
    for (j, label) in cfg.populations.iter().enumerate() {
        populations.push(observe(&mut rng, &shocked(&curves[j]), cfg.exposure, label)?);
    }
    let total_exposure = cfg.exposure.map(|e| e * n_pop as f64);
    let dataset = MortalityDataset {
        years: years.clone(),
        grid: grid.clone(),
        populations,
        total: observe(&mut rng, &shocked(&total), total_exposure, TOTAL_LABEL)?,
    };
    let mut future_pops = Vec::with_capacity(n_pop);
    for (j, label) in cfg.populations.iter().enumerate() {
        future_pops.push(observe(&mut rng, &future_curves[j], cfg.exposure, label)?);
    }
    let future = MortalityDataset {
        years: future_years,
        grid: grid.clone(),
        populations: future_pops,
        total: observe(&mut rng, &total_future, total_exposure, TOTAL_LABEL)?,
    };

    let weights: Vec<bool> = (0..n).map(|t| picked.binary_search(&t).is_err()).collect();
    let sigma2 = vec![cfg.noise_variance; n_pop];
    let decomposition = MultilevelDecomposition {
        labels: cfg.populations.clone(),
        years,
        grid,
        mu: mu.clone(),
        eta,
        common: eigen(mu, phi, beta, &cfg.common_eigenvalues, weights.clone()),
        residual: (0..n_pop)
            .map(|j| eigen(DVector::zeros(p), psi[j].clone(), gamma[j].clone(), &cfg.residual_eigenvalues, weights.clone()))
            .collect(),
        sigma2,
        lambda: f64::INFINITY,
        threshold: 1.0,
        curves,
    };
    let contaminated_years = picked.iter().map(|t| cfg.first_year + *t as i32).collect();
    Ok(SynthData {
        config: cfg.clone(),
        dataset,
        future,
        truth: SynthTruth {
            decomposition,
            total,
            future_common_scores: beta_future,
            future_residual_scores: gamma_future,
            future_curves,
            contaminated_years,
            shock,
        },
    })
}

impl SynthData {
    /// Truth manifest: the configuration, contaminated years and true component counts.
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "years": [self.dataset.years.first(), self.dataset.years.last()],
            "future_years": [self.future.years.first(), self.future.years.last()],
            "common_components": self.config.common_eigenvalues.len(),
            "residual_components": self.config.residual_eigenvalues.len(),
            "contaminated_years": self.truth.contaminated_years,
            "within_cluster_variability": crate::multilevel::within_cluster_variability(
                &self.config.common_eigenvalues,
                &self.config.residual_eigenvalues,
            ).ok(),
        })
    }

    /// Write `data.csv`, `future.csv`, `truth.json` and the true decomposition under `truth/`.
    pub fn write_dir(&self, dir: &Path, header: &str) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("data.csv"), format!("{header}{}", crate::ingest::canonical::to_csv(&self.dataset)))?;
        std::fs::write(dir.join("future.csv"), format!("{header}{}", crate::ingest::canonical::to_csv(&self.future)))?;
        std::fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&self.manifest())? + "\n")?;
        let mut files = vec!["data.csv".to_string(), "future.csv".into(), "truth.json".into()];
        for f in self.truth.decomposition.write_dir(&dir.join("truth"), header)? {
            files.push(format!("truth/{f}"));
        }
        Ok(files)
    }
}

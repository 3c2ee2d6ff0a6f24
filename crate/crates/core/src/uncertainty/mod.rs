//! Point forecasts of log-mortality curves, bootstrap sample paths, percentile
//! intervals for mortality and life expectancy.
//!
//! Score uncertainty is approximated parametrically: each replicate perturbs the
//! point score forecast by a Gaussian draw with the forecaster's h-step error
//! variance. Model error and a smoothing-error term are added per age.

mod lifetable;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::multilevel::MultilevelDecomposition;
use crate::scorecast::{ScoreForecast, ScoreForecasts};
use crate::smooth::WeightSurface;

pub use lifetable::{life_expectancy, life_table, LifeTable, INFANT_SEPARATION, RADIX};

pub const DEFAULT_REPLICATES: usize = 1000;
/// Coverage levels reported for every forecast.
pub const LEVELS: [f64; 2] = [0.8, 0.95];
/// Training years averaged for the future smoothing-error scale.
pub const SMOOTHING_SD_YEARS: usize = 5;

pub const SCORE_UNCERTAINTY_NOTE: &str = "score uncertainty: parametric Gaussian bootstrap approximation";

/// Percentile interval with tail probability `alpha` split equally between the ends.
pub fn percentile_interval(samples: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::Input("percentile intervals need at least two samples".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Input(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, alpha))
}

fn percentile_sorted(sorted: &[f64], alpha: f64) -> (f64, f64) {
    (
        crate::stats::quantile_sorted(sorted, alpha / 2.0),
        crate::stats::quantile_sorted(sorted, 1.0 - alpha / 2.0),
    )
}

fn check_forecasts(dec: &MultilevelDecomposition, fc: &ScoreForecasts, horizon: usize) -> Result<()> {
    let short = |what: String, f: &ScoreForecast| -> Result<()> {
        if f.point.len() < horizon || f.variance.len() < horizon {
            return Err(Error::Input(format!("{what} forecast covers {} steps, {horizon} needed", f.point.len())));
        }
        Ok(())
    };
    if fc.common.len() != dec.common.num_components() {
        return Err(Error::Input(format!(
            "{} common score forecasts for {} components",
            fc.common.len(),
            dec.common.num_components()
        )));
    }
    if fc.residual.len() != dec.residual.len() {
        return Err(Error::Input(format!("score forecasts for {} populations, decomposition has {}", fc.residual.len(), dec.residual.len())));
    }
    for (k, f) in fc.common.iter().enumerate() {
        short(format!("common component {}", k + 1), f)?;
    }
    for (j, (fs, r)) in fc.residual.iter().zip(&dec.residual).enumerate() {
        if fs.len() != r.num_components() {
            return Err(Error::Input(format!(
                "population {}: {} score forecasts for {} components",
                dec.labels[j],
                fs.len(),
                r.num_components()
            )));
        }
        for (l, f) in fs.iter().enumerate() {
            short(format!("population {} component {}", dec.labels[j], l + 1), f)?;
        }
    }
    Ok(())
}

/// `mu + eta^j + sum_k beta_k phi_k + sum_l gamma_l psi_l` at each horizon, as H x p per population.
pub fn point_forecast(dec: &MultilevelDecomposition, fc: &ScoreForecasts, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
    check_forecasts(dec, fc, horizon)?;
    let p = dec.mu.len();
    let common = common_curves(dec, fc, horizon, |f, h| f.point[h]);
    Ok((0..dec.labels.len())
        .map(|j| {
            let base = &dec.mu + &dec.eta[j] + &dec.residual[j].mean;
            let mut out = DMatrix::zeros(horizon, p);
            for h in 0..horizon {
                let mut row = &base + &common[h];
                for (l, f) in fc.residual[j].iter().enumerate() {
                    row += dec.residual[j].basis.column(l) * f.point[h];
                }
                out.set_row(h, &row.transpose());
            }
            out
        })
        .collect())
}

fn common_curves(dec: &MultilevelDecomposition, fc: &ScoreForecasts, horizon: usize, score: impl Fn(&ScoreForecast, usize) -> f64) -> Vec<DVector<f64>> {
    (0..horizon)
        .map(|h| {
            let mut v = DVector::zeros(dec.mu.len());
            for (k, f) in fc.common.iter().enumerate() {
                v += dec.common.basis.column(k) * score(f, h);
            }
            v
        })
        .collect()
}

/// Per-age mean measurement standard deviation over the last `years` rows.
/// Undefined cells are skipped; ages with no defined cell get 0.
pub fn smoothing_sd(ws: &WeightSurface, years: usize) -> DVector<f64> {
    let (n, p) = ws.variances.shape();
    let from = n.saturating_sub(years);
    DVector::from_fn(p, |i, _| {
        let sds: Vec<f64> = (from..n)
            .map(|t| ws.variances[(t, i)])
            .filter(|v| v.is_finite() && *v >= 0.0)
            .map(f64::sqrt)
            .collect();
        if sds.is_empty() { 0.0 } else { crate::stats::mean(&sds) }
    })
}

/// Bootstrap sample paths of log mortality.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePaths {
    pub replicates: usize,
    pub horizon: usize,
    pub ages: usize,
    /// Per population, `replicates * horizon * ages` values indexed `(b * horizon + h) * ages + i`.
    pub values: Vec<Vec<f64>>,
}

impl SamplePaths {
    pub fn get(&self, j: usize, b: usize, h: usize, i: usize) -> f64 {
        self.values[j][(b * self.horizon + h) * self.ages + i]
    }

    pub fn path(&self, j: usize, b: usize, h: usize) -> &[f64] {
        let start = (b * self.horizon + h) * self.ages;
        &self.values[j][start..start + self.ages]
    }

    /// All replicates of one cell.
    pub fn cell(&self, j: usize, h: usize, i: usize) -> Vec<f64> {
        (0..self.replicates).map(|b| self.get(j, b, h, i)).collect()
    }
}

fn replicate_rng(seed: u64, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    rng
}

fn checked_sd(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v.sqrt())
    } else {
        Err(Error::Numerical(format!("{what} variance is {v}")))
    }
}

/// Draw `replicates` sample paths per population. `smoothing_sd` holds one
/// per-age scale vector per population (see [`smoothing_sd`]).
///
/// Replicate `b` uses its own ChaCha stream derived from `(seed, b)`, so the
/// output does not depend on thread scheduling.
pub fn bootstrap_paths(
    dec: &MultilevelDecomposition,
    fc: &ScoreForecasts,
    smoothing_sd: &[DVector<f64>],
    horizon: usize,
    replicates: usize,
    seed: u64,
) -> Result<SamplePaths> {
    if replicates < 1 {
        return Err(Error::Input("at least one bootstrap replicate is required".into()));
    }
    check_forecasts(dec, fc, horizon)?;
    let n_pop = dec.labels.len();
    let p = dec.mu.len();
    if smoothing_sd.len() != n_pop || smoothing_sd.iter().any(|d| d.len() != p) {
        return Err(crate::error::shape("one smoothing scale vector of full age length per population is required"));
    }
    // standard deviations validated up front
    let common_sd: Vec<Vec<f64>> = fc
        .common
        .iter()
        .map(|f| f.variance[..horizon].iter().map(|v| checked_sd(*v, "common score")).collect())
        .collect::<Result<_>>()?;
    let residual_sd: Vec<Vec<Vec<f64>>> = fc
        .residual
        .iter()
        .map(|fs| {
            fs.iter()
                .map(|f| f.variance[..horizon].iter().map(|v| checked_sd(*v, "residual score")).collect())
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let model_sd: Vec<f64> = dec.sigma2.iter().map(|v| checked_sd(*v, "model error")).collect::<Result<_>>()?;
    let point = point_forecast(dec, fc, horizon)?;

    let per_replicate: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(seed, b);
            let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
            let mut out = vec![0.0; n_pop * horizon * p];
            // common score noise is shared by every population
            let mut common = vec![DVector::zeros(p); horizon];
            for k in 0..fc.common.len() {
                for h in 0..horizon {
                    common[h] += dec.common.basis.column(k) * (common_sd[k][h] * z());
                }
            }
            for j in 0..n_pop {
                for h in 0..horizon {
                    let mut row = common[h].clone();
                    for l in 0..fc.residual[j].len() {
                        row += dec.residual[j].basis.column(l) * (residual_sd[j][l][h] * z());
                    }
                    let dst = &mut out[(j * horizon + h) * p..(j * horizon + h + 1) * p];
                    for i in 0..p {
                        let e = model_sd[j] * z();
                        let d = smoothing_sd[j][i] * z();
                        dst[i] = point[j][(h, i)] + row[i] + e + d;
                    }
                }
            }
            out
        })
        .collect();

    let mut values = vec![Vec::with_capacity(replicates * horizon * p); n_pop];
    for rep in &per_replicate {
        for (j, v) in values.iter_mut().enumerate() {
            v.extend_from_slice(&rep[j * horizon * p..(j + 1) * horizon * p]);
        }
    }
    Ok(SamplePaths { replicates, horizon, ages: p, values })
}

/// Life expectancy of every sample path: `replicates x horizon` per population.
pub fn e0_from_paths(paths: &SamplePaths, ages: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    (0..paths.values.len())
        .map(|j| {
            let cells: Vec<f64> = (0..paths.replicates * paths.horizon)
                .into_par_iter()
                .map(|bh| {
                    let (b, h) = (bh / paths.horizon, bh % paths.horizon);
                    let m: Vec<f64> = paths.path(j, b, h).iter().map(|v| v.exp()).collect();
                    life_expectancy(&m, ages)
                })
                .collect::<Result<_>>()?;
            Ok(DMatrix::from_row_slice(paths.replicates, paths.horizon, &cells))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub level: f64,
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastBundle {
    pub labels: Vec<String>,
    pub ages: Vec<String>,
    /// Calendar years of the forecasts.
    pub years: Vec<i32>,
    /// Per population, H x p forecast log mortality.
    pub point: Vec<DMatrix<f64>>,
    pub samples: SamplePaths,
    /// Per population and level, H x p bounds on the rate scale.
    pub intervals: Vec<Vec<Band>>,
    /// Per population, life expectancy of the point forecast at each horizon.
    pub e0_point: Vec<Vec<f64>>,
    /// Per population, replicates x H.
    pub e0_samples: Vec<DMatrix<f64>>,
    /// Per population and level, 1 x H bounds.
    pub e0_intervals: Vec<Vec<Band>>,
    pub seed: u64,
    pub replicates: usize,
    pub lambda: f64,
    pub method: crate::scorecast::Method,
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("coverage level must lie in (0, 1), got {level}")))
    }
}

fn band_at(level: f64, samples: impl Fn(usize, usize) -> Vec<f64>, rows: usize, cols: usize) -> Band {
    let mut band = Band { level, lower: DMatrix::zeros(rows, cols), upper: DMatrix::zeros(rows, cols) };
    for r in 0..rows {
        for c in 0..cols {
            let mut s = samples(r, c);
            s.sort_by(f64::total_cmp);
            let (lo, hi) = percentile_sorted(&s, 1.0 - level);
            band.lower[(r, c)] = lo;
            band.upper[(r, c)] = hi;
        }
    }
    band
}

fn bands(samples: impl Fn(usize, usize) -> Vec<f64>, rows: usize, cols: usize) -> Vec<Band> {
    let mut out: Vec<Band> = LEVELS
        .iter()
        .map(|&level| Band { level, lower: DMatrix::zeros(rows, cols), upper: DMatrix::zeros(rows, cols) })
        .collect();
    for r in 0..rows {
        for c in 0..cols {
            let mut s = samples(r, c);
            s.sort_by(f64::total_cmp);
            for band in &mut out {
                let (lo, hi) = percentile_sorted(&s, 1.0 - band.level);
                band.lower[(r, c)] = lo;
                band.upper[(r, c)] = hi;
            }
        }
    }
    out
}

/// Point forecasts, bootstrap paths and intervals for every population.
/// Mortality intervals are percentiles of the exponentiated paths.
pub fn forecast_bundle(
    dec: &MultilevelDecomposition,
    fc: &ScoreForecasts,
    smoothing_sd: &[DVector<f64>],
    horizon: usize,
    replicates: usize,
    seed: u64,
) -> Result<ForecastBundle> {
    if replicates < 2 {
        return Err(Error::Input("percentile intervals need at least two replicates".into()));
    }
    let point = point_forecast(dec, fc, horizon)?;
    let samples = bootstrap_paths(dec, fc, smoothing_sd, horizon, replicates, seed)?;
    let ages = dec.grid.ages();
    let p = ages.len();
    let intervals = (0..dec.labels.len())
        .map(|j| bands(|h, i| samples.cell(j, h, i).into_iter().map(f64::exp).collect(), horizon, p))
        .collect();
    let e0_point = point
        .iter()
        .map(|pt| {
            (0..horizon)
                .map(|h| life_expectancy(&pt.row(h).iter().map(|v| v.exp()).collect::<Vec<_>>(), ages))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let e0_samples = e0_from_paths(&samples, ages)?;
    let e0_intervals = e0_samples
        .iter()
        .map(|s| bands(|_, h| s.column(h).iter().copied().collect(), 1, horizon))
        .collect();
    let last = *dec.years.last().ok_or_else(|| Error::Input("decomposition has no years".into()))?;
    Ok(ForecastBundle {
        labels: dec.labels.clone(),
        ages: (0..p).map(|i| dec.grid.age_label(i)).collect(),
        years: (1..=horizon as i32).map(|h| last + h).collect(),
        point,
        samples,
        intervals,
        e0_point,
        e0_samples,
        e0_intervals,
        seed,
        replicates,
        lambda: dec.lambda,
        method: fc.method,
    })
}

pub(crate) fn format_lambda(lambda: f64) -> String {
    if lambda.is_infinite() { "inf".into() } else { lambda.to_string() }
}

impl ForecastBundle {
    pub fn horizon(&self) -> usize {
        self.years.len()
    }

    /// Rate-scale band for population `j` at any coverage level.
    pub fn band(&self, j: usize, level: f64) -> Result<Band> {
        check_level(level)?;
        if let Some(b) = self.intervals[j].iter().find(|b| b.level == level) {
            return Ok(b.clone());
        }
        let (h, p) = (self.horizon(), self.ages.len());
        Ok(band_at(level, |r, c| self.samples.cell(j, r, c).into_iter().map(f64::exp).collect(), h, p))
    }

    /// Life-expectancy band (1 x H) for population `j` at any coverage level.
    pub fn e0_band(&self, j: usize, level: f64) -> Result<Band> {
        check_level(level)?;
        if let Some(b) = self.e0_intervals[j].iter().find(|b| b.level == level) {
            return Ok(b.clone());
        }
        let s = &self.e0_samples[j];
        Ok(band_at(level, |_, h| s.column(h).iter().copied().collect(), 1, self.horizon()))
    }

    fn header(&self) -> String {
        format!(
            "# seed={} lambda={} method={} replicates={}\n# {SCORE_UNCERTAINTY_NOTE}\n",
            self.seed,
            format_lambda(self.lambda),
            self.method,
            self.replicates
        )
    }

    pub fn point_csv(&self) -> String {
        let mut out = self.header() + "population,year,age,log_rate,rate\n";
        for (j, label) in self.labels.iter().enumerate() {
            for (h, year) in self.years.iter().enumerate() {
                for (i, age) in self.ages.iter().enumerate() {
                    let v = self.point[j][(h, i)];
                    let _ = writeln!(out, "{label},{year},{age},{v},{}", v.exp());
                }
            }
        }
        out
    }

    pub fn intervals_csv(&self) -> String {
        let mut out = self.header() + "population,year,age,level,lower,upper\n";
        for (j, label) in self.labels.iter().enumerate() {
            for band in &self.intervals[j] {
                for (h, year) in self.years.iter().enumerate() {
                    for (i, age) in self.ages.iter().enumerate() {
                        let _ = writeln!(out, "{label},{year},{age},{},{},{}", band.level, band.lower[(h, i)], band.upper[(h, i)]);
                    }
                }
            }
        }
        out
    }

    pub fn e0_csv(&self) -> String {
        let mut out = self.header() + "population,year,e0";
        for level in LEVELS {
            let pct = (level * 100.0).round();
            let _ = write!(out, ",lower{pct},upper{pct}");
        }
        out.push('\n');
        for (j, label) in self.labels.iter().enumerate() {
            for (h, year) in self.years.iter().enumerate() {
                let _ = write!(out, "{label},{year},{}", self.e0_point[j][h]);
                for band in &self.e0_intervals[j] {
                    let _ = write!(out, ",{},{}", band.lower[(0, h)], band.upper[(0, h)]);
                }
                out.push('\n');
            }
        }
        out
    }

    /// Write `point.csv`, `intervals.csv` and `e0.csv` below `dir`, each prefixed by `header`.
    pub fn write_dir(&self, dir: &Path, header: &str) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let files = [("point.csv", self.point_csv()), ("intervals.csv", self.intervals_csv()), ("e0.csv", self.e0_csv())];
        for (name, body) in &files {
            std::fs::write(dir.join(name), format!("{header}{body}"))?;
        }
        Ok(files.iter().map(|(n, _)| n.to_string()).collect())
    }
}

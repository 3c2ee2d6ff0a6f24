//! Two-level functional decomposition of a group of populations:
//!
//! `f^j_t(x) = mu(x) + eta^j(x) + R_t(x) + U^j_t(x) + e^j_t(x)`
//!
//! where `R_t` is the common trend estimated from the total series and `U^j_t` the
//! population-specific residual trend.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fpca::{column_mean, robust_fpca, standard_fpca, EigenDecomposition};
use crate::ingest::AgeGrid;
use crate::scorecast::ScoreForecast;
use crate::smooth::SmoothedDataset;

/// Divergence tolerance on the long-run slope of a forecast difference, per step.
pub const COHERENCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelDecomposition {
    pub labels: Vec<String>,
    pub years: Vec<i32>,
    pub grid: AgeGrid,
    /// Time-mean of the total curves.
    pub mu: DVector<f64>,
    /// Population mean minus `mu`, one per population.
    pub eta: Vec<DVector<f64>>,
    /// Decomposition of the total curves.
    pub common: EigenDecomposition,
    /// Decomposition of each population's residual curves.
    pub residual: Vec<EigenDecomposition>,
    /// Mean squared leftover per population.
    pub sigma2: Vec<f64>,
    /// Outlier tuning constant; infinite for the standard method.
    pub lambda: f64,
    pub threshold: f64,
    /// The smoothed curves that were decomposed (n x p per population).
    pub curves: Vec<DMatrix<f64>>,
}

/// Sample means: `mu` from the total curves and `eta^j = mean(f^j) - mu`.
pub fn estimate_means(total: &DMatrix<f64>, populations: &[DMatrix<f64>]) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
    if total.nrows() == 0 {
        return Err(Error::Input("no years to average".into()));
    }
    for (j, c) in populations.iter().enumerate() {
        if c.shape() != total.shape() {
            return Err(crate::error::shape(format!(
                "population {} has shape {:?}, total has {:?}",
                j + 1,
                c.shape(),
                total.shape()
            )));
        }
    }
    let mu = column_mean(total);
    let eta = populations.iter().map(|c| column_mean(c) - &mu).collect();
    Ok((mu, eta))
}

/// `sum(common) / (sum(common) + sum(residual))` over full spectra.
pub fn within_cluster_variability(common: &[f64], residual: &[f64]) -> Result<f64> {
    if common.iter().chain(residual).any(|v| !(*v >= 0.0)) {
        return Err(Error::Input("spectra must be nonnegative".into()));
    }
    let a: f64 = common.iter().sum();
    let b: f64 = residual.iter().sum();
    if !(a + b > 0.0) {
        return Err(Error::Input("both spectra are zero".into()));
    }
    Ok(a / (a + b))
}

type Fpca<'a> = &'a (dyn Fn(&DMatrix<f64>, &DVector<f64>, &[f64]) -> Result<EigenDecomposition> + Sync);

fn decompose_with(
    labels: Vec<String>,
    years: Vec<i32>,
    grid: AgeGrid,
    total: &DMatrix<f64>,
    curves: Vec<DMatrix<f64>>,
    lambda: f64,
    threshold: f64,
    fit: Fpca,
) -> Result<MultilevelDecomposition> {
    let (n, p) = total.shape();
    if curves.len() < 2 {
        return Err(Error::Input(format!("need at least 2 populations, got {}", curves.len())));
    }
    if labels.len() != curves.len() || years.len() != n || grid.len() != p {
        return Err(crate::error::shape("labels, years or grid do not match the curves"));
    }
    if n < 4 {
        return Err(Error::Input(format!("need at least 4 years, got {n}")));
    }
    let q = grid.trapezoid_weights();
    let (mu, eta) = estimate_means(total, &curves)?;
    let common = fit(total, &mu, &q).map_err(|e| e.context("common component"))?;

    let residual_curves: Vec<DMatrix<f64>> = curves
        .iter()
        .zip(&eta)
        .map(|(c, eta)| DMatrix::from_fn(n, p, |t, i| c[(t, i)] - mu[i] - eta[i]) - &common.scores * common.basis.transpose())
        .collect();
    let residual = residual_curves
        .par_iter()
        .zip(&labels)
        .map(|(u, label)| fit(u, &column_mean(u), &q).map_err(|e| e.context(format!("population {label}"))))
        .collect::<Result<Vec<_>>>()?;

    let sigma2 = residual_curves
        .iter()
        .zip(&residual)
        .map(|(u, r)| {
            let left = u - DMatrix::from_fn(n, p, |_, i| r.mean[i]) - &r.scores * r.basis.transpose();
            left.iter().map(|v| v * v).sum::<f64>() / (n * p) as f64
        })
        .collect();

    Ok(MultilevelDecomposition {
        labels,
        years,
        grid,
        mu,
        eta,
        common,
        residual,
        sigma2,
        lambda,
        threshold,
        curves,
    })
}

/// Robust multilevel decomposition of raw curve matrices. `lambda = inf` is the standard method.
pub fn decompose_curves(
    labels: Vec<String>,
    years: Vec<i32>,
    grid: AgeGrid,
    total: &DMatrix<f64>,
    curves: Vec<DMatrix<f64>>,
    lambda: f64,
    threshold: f64,
) -> Result<MultilevelDecomposition> {
    let fit = move |c: &DMatrix<f64>, center: &DVector<f64>, q: &[f64]| robust_fpca(c, center, q, lambda, threshold);
    decompose_with(labels, years, grid, total, curves, lambda, threshold, &fit)
}

fn unpack(sm: &SmoothedDataset) -> (Vec<String>, DMatrix<f64>, Vec<DMatrix<f64>>) {
    (
        sm.populations.iter().map(|s| s.label.clone()).collect(),
        sm.total.values.clone(),
        sm.populations.iter().map(|s| s.values.clone()).collect(),
    )
}

/// Robust multilevel decomposition of smoothed surfaces.
pub fn decompose(sm: &SmoothedDataset, lambda: f64, threshold: f64) -> Result<MultilevelDecomposition> {
    let (labels, total, curves) = unpack(sm);
    decompose_curves(labels, sm.years.clone(), sm.grid.clone(), &total, curves, lambda, threshold)
}

/// The standard (non-robust) multilevel decomposition.
pub fn decompose_standard(sm: &SmoothedDataset, threshold: f64) -> Result<MultilevelDecomposition> {
    let (labels, total, curves) = unpack(sm);
    let fit = move |c: &DMatrix<f64>, center: &DVector<f64>, q: &[f64]| standard_fpca(c, center, q, threshold);
    decompose_with(labels, sm.years.clone(), sm.grid.clone(), &total, curves, f64::INFINITY, threshold, &fit)
}

impl MultilevelDecomposition {
    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn population_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Input(format!("unknown population `{label}`")))
    }

    /// Fitted curve for population `j` in year index `t`, and the leftover `e^j_t`.
    pub fn reconstruct(&self, j: usize, t: usize) -> Result<(DVector<f64>, DVector<f64>)> {
        if j >= self.labels.len() {
            return Err(Error::Input(format!("population index {j} out of range")));
        }
        if t >= self.n_years() {
            return Err(Error::Input(format!("year index {t} out of range")));
        }
        let r = &self.residual[j];
        let fit = &self.mu + &self.eta[j] + &r.mean + self.common.component_sum(t) + r.component_sum(t);
        let leftover = self.curves[j].row(t).transpose() - &fit;
        Ok((fit, leftover))
    }

    /// Share of variance carried by the common component for population `j`.
    pub fn within_cluster_variability(&self, j: usize) -> Result<f64> {
        within_cluster_variability(&self.common.spectrum, &self.residual[j].spectrum)
    }

    /// Write the decomposition as CSV files plus `manifest.json` into `dir`.
    /// Each CSV starts with the given comment header lines.
    pub fn write_dir(&self, dir: &Path, header: &str) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let mut write = |name: String, body: String| -> Result<()> {
            std::fs::write(dir.join(&name), format!("{header}{body}"))?;
            files.push(name);
            Ok(())
        };
        let ages: Vec<String> = (0..self.grid.len()).map(|i| self.grid.age_label(i)).collect();

        let mut means = String::from("age,mu");
        for l in &self.labels {
            let _ = write!(means, ",eta_{l},residual_mean_{l}");
        }
        means.push('\n');
        for (i, age) in ages.iter().enumerate() {
            let _ = write!(means, "{age},{}", self.mu[i]);
            for (eta, r) in self.eta.iter().zip(&self.residual) {
                let _ = write!(means, ",{},{}", eta[i], r.mean[i]);
            }
            means.push('\n');
        }
        write("means.csv".into(), means)?;

        let parts = std::iter::once(("common".to_string(), &self.common))
            .chain(self.labels.iter().map(|l| format!("residual_{l}")).zip(self.residual.iter()));
        for (name, dec) in parts {
            write(format!("{name}_basis.csv"), basis_csv(&ages, dec))?;
            write(format!("{name}_scores.csv"), scores_csv(&self.years, dec))?;
            write(format!("{name}_eigenvalues.csv"), eigen_csv(dec))?;
        }

        let mut s2 = String::from("population,sigma2,within_cluster_variability\n");
        for (j, l) in self.labels.iter().enumerate() {
            let _ = writeln!(s2, "{l},{},{}", self.sigma2[j], self.within_cluster_variability(j)?);
        }
        write("sigma2.csv".into(), s2)?;

        let manifest = serde_json::json!({
            "populations": self.labels,
            "years": [self.years.first(), self.years.last()],
            "ages": ages,
            "lambda": if self.lambda.is_infinite() { "inf".to_string() } else { self.lambda.to_string() },
            "variance_threshold": self.threshold,
            "common_components": self.common.num_components(),
            "residual_components": self.residual.iter().map(|r| r.num_components()).collect::<Vec<_>>(),
            "files": files,
        });
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        files.push("manifest.json".into());
        Ok(files)
    }
}

fn basis_csv(ages: &[String], dec: &EigenDecomposition) -> String {
    let mut out = String::from("age");
    for k in 0..dec.num_components() {
        let _ = write!(out, ",phi{}", k + 1);
    }
    out.push('\n');
    for (i, age) in ages.iter().enumerate() {
        out.push_str(age);
        for k in 0..dec.num_components() {
            let _ = write!(out, ",{}", dec.basis[(i, k)]);
        }
        out.push('\n');
    }
    out
}

fn scores_csv(years: &[i32], dec: &EigenDecomposition) -> String {
    let mut out = String::from("year,weight,integrated_error");
    for k in 0..dec.num_components() {
        let _ = write!(out, ",score{}", k + 1);
    }
    out.push('\n');
    for (t, year) in years.iter().enumerate() {
        let v = dec.integrated_errors.get(t).map_or(".".to_string(), |v| v.to_string());
        let _ = write!(out, "{year},{},{v}", dec.obs_weights[t] as u8);
        for k in 0..dec.num_components() {
            let _ = write!(out, ",{}", dec.scores[(t, k)]);
        }
        out.push('\n');
    }
    out
}

fn eigen_csv(dec: &EigenDecomposition) -> String {
    let mut out = String::from("component,eigenvalue,retained\n");
    for (k, v) in dec.spectrum.iter().enumerate() {
        let _ = writeln!(out, "{},{v},{}", k + 1, (k < dec.num_components()) as u8);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coherence {
    Convergent,
    Divergent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    /// Zero-based residual component index.
    pub component: usize,
    /// Long-run per-step slope of the forecast difference (population 1 minus 2).
    pub slope: f64,
    pub status: Coherence,
}

/// Check whether forecasts of paired residual components of two populations drift apart.
///
/// A pair diverges when the models imply a trending difference, i.e. their long-run
/// slopes differ by more than [`COHERENCE_TOLERANCE`].
pub fn coherence_diagnostic(first: &[ScoreForecast], second: &[ScoreForecast]) -> Vec<CoherenceReport> {
    first
        .iter()
        .zip(second)
        .enumerate()
        .map(|(component, (a, b))| {
            let slope = a.long_run_slope - b.long_run_slope;
            let status = if slope.abs() > COHERENCE_TOLERANCE { Coherence::Divergent } else { Coherence::Convergent };
            CoherenceReport { component, slope, status }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpca::inner;
    use crate::scorecast::{rwf, Method};

    fn grid(p: usize) -> AgeGrid {
        AgeGrid::single_years(0, p as u32 - 1, false).unwrap()
    }

    fn labels() -> Vec<String> {
        vec!["F".into(), "M".into()]
    }

    /// mu + eta^j + a_t g + b^j_t h^j with orthogonal shapes.
    fn exact(n: usize, p: usize) -> (DMatrix<f64>, Vec<DMatrix<f64>>, Vec<f64>, Vec<Vec<f64>>) {
        let x = |i: usize| i as f64 / (p - 1) as f64;
        let mu: Vec<f64> = (0..p).map(|i| -5.0 + 3.0 * x(i)).collect();
        let g: Vec<f64> = (0..p).map(|i| (std::f64::consts::PI * x(i)).cos()).collect();
        let h1: Vec<f64> = (0..p).map(|i| (2.0 * std::f64::consts::PI * x(i)).cos()).collect();
        let h2: Vec<f64> = (0..p).map(|i| (3.0 * std::f64::consts::PI * x(i)).cos()).collect();
        let a: Vec<f64> = (0..n).map(|t| t as f64 - (n - 1) as f64 / 2.0).collect();
        let raw: Vec<f64> = (0..n).map(|t| 0.3 * ((t as f64) * 1.3).sin()).collect();
        let b: Vec<f64> = raw.iter().map(|v| v - crate::stats::mean(&raw)).collect();
        let eta = 0.2;
        let total = DMatrix::from_fn(n, p, |t, i| mu[i] + a[t] * g[i]);
        let f = DMatrix::from_fn(n, p, |t, i| mu[i] - eta + a[t] * g[i] + b[t] * h1[i]);
        let m = DMatrix::from_fn(n, p, |t, i| mu[i] + eta + a[t] * g[i] - b[t] * h2[i]);
        (total, vec![f, m], g, vec![h1, h2])
    }

    /// Sine of the angle, accurate for nearly parallel vectors.
    fn angle(q: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let s = inner(q, a, b) / inner(q, b, b);
        let r: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - s * y).collect();
        (inner(q, &r, &r) / inner(q, a, a)).sqrt()
    }

    #[test]
    fn means_by_hand() {
        let total = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 3.0, 4.0, 7.0]);
        let f = DMatrix::from_row_slice(2, 3, &[0.0, 2.0, 2.0, 2.0, 2.0, 6.0]);
        let (mu, eta) = estimate_means(&total, &[f.clone(), total.clone()]).unwrap();
        assert_eq!(mu.as_slice(), &[2.0, 3.0, 5.0]);
        assert_eq!(eta[0].as_slice(), &[-1.0, -1.0, -1.0]);
        assert_eq!(eta[1].as_slice(), &[0.0, 0.0, 0.0]);
        let c = DMatrix::from_element(4, 3, 1.5);
        assert_eq!(estimate_means(&c, &[c.clone()]).unwrap().0.as_slice(), &[1.5; 3]);
        assert!(estimate_means(&c, &[f]).is_err());
    }

    #[test]
    fn exact_components_are_recovered() {
        let (n, p) = (12, 21);
        let (total, curves, g, h) = exact(n, p);
        let dec = decompose_curves(labels(), (2000..2012).collect(), grid(p), &total, curves, f64::INFINITY, 0.9).unwrap();
        let q = grid(p).trapezoid_weights();
        assert_eq!(dec.common.num_components(), 1);
        let phi: Vec<f64> = dec.common.basis.column(0).iter().copied().collect();
        assert!(angle(&q, &phi, &g) < 1e-8);
        for j in 0..2 {
            assert_eq!(dec.residual[j].num_components(), 1);
            let psi: Vec<f64> = dec.residual[j].basis.column(0).iter().copied().collect();
            assert!(angle(&q, &psi, &h[j]) < 1e-8);
            assert!(dec.sigma2[j] <= 1e-10);
            for t in 0..n {
                let (_, left) = dec.reconstruct(j, t).unwrap();
                assert!(left.amax() < 1e-8);
            }
        }
        // F and M deviate symmetrically around the total
        assert!((&dec.eta[0] + &dec.eta[1]).amax() < 1e-10);
    }

    #[test]
    fn identical_populations_have_no_residual_variation() {
        let (n, p) = (8, 11);
        let (total, _, _, _) = exact(n, p);
        let dec = decompose_curves(labels(), (0..n as i32).collect(), grid(p), &total, vec![total.clone(), total.clone()], 3.0, 0.9)
            .unwrap();
        for j in 0..2 {
            assert!(dec.residual[j].total_variance < 1e-20);
            assert!((dec.within_cluster_variability(j).unwrap() - 1.0).abs() < 1e-8);
            assert!(dec.eta[j].amax() < 1e-14);
        }
    }

    #[test]
    fn constant_data_reconstructs_to_means() {
        let p = 5;
        let total = DMatrix::from_element(6, p, -3.0);
        let f = DMatrix::from_element(6, p, -3.5);
        let m = DMatrix::from_element(6, p, -2.5);
        let dec = decompose_curves(labels(), (0..6).collect(), grid(p), &total, vec![f, m], f64::INFINITY, 0.9).unwrap();
        assert_eq!(dec.common.num_components(), 0);
        let (fit, _) = dec.reconstruct(0, 2).unwrap();
        assert!(fit.iter().all(|v| (v + 3.5).abs() < 1e-12));
    }

    #[test]
    fn stored_sigma2_matches_leftovers() {
        let (n, p) = (10, 9);
        let (total, mut curves, _, _) = exact(n, p);
        for (k, v) in curves[0].iter_mut().enumerate() {
            *v += 0.01 * ((k * 37 % 11) as f64 - 5.0);
        }
        let dec = decompose_curves(labels(), (0..n as i32).collect(), grid(p), &total, curves.clone(), f64::INFINITY, 0.9).unwrap();
        for j in 0..2 {
            let mut ss = 0.0;
            for t in 0..n {
                let (fit, left) = dec.reconstruct(j, t).unwrap();
                ss += left.norm_squared();
                let back = fit + left;
                assert!((back - curves[j].row(t).transpose()).amax() < 1e-12);
            }
            assert!((ss / (n * p) as f64 - dec.sigma2[j]).abs() < 1e-12);
        }
        assert!(dec.reconstruct(2, 0).is_err());
    }

    #[test]
    fn variability_arithmetic() {
        assert!((within_cluster_variability(&[9.0, 1.0], &[0.5, 0.5]).unwrap() - 10.0 / 11.0).abs() < 1e-15);
        assert_eq!(within_cluster_variability(&[2.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(within_cluster_variability(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn coherence_cases() {
        let flat = rwf(&[1.0, 2.0, 1.0, 2.0, 1.0], 10).unwrap();
        let trending = rwf(&[0.0, 1.0, 2.0, 3.0, 4.0], 10).unwrap();
        let r = coherence_diagnostic(&[flat.clone()], &[flat.clone()]);
        assert_eq!(r[0].status, Coherence::Convergent);
        let r = coherence_diagnostic(&[trending.clone()], &[flat.clone()]);
        assert_eq!(r[0].status, Coherence::Divergent);
        assert!((r[0].slope - 1.0).abs() < 1e-12);
        let r = coherence_diagnostic(&[trending.clone()], &[trending]);
        assert_eq!(r[0].status, Coherence::Convergent);
        let mean_reverting = crate::scorecast::forecast_series(&[0.5, -0.2, 0.1, 0.3, -0.4, 0.2, 0.0, -0.1, 0.3, -0.3, 0.1, 0.2], Method::Ets, 10).unwrap();
        let r = coherence_diagnostic(&[mean_reverting.clone()], &[mean_reverting]);
        assert_eq!(r[0].status, Coherence::Convergent);
    }

    #[test]
    fn serialises_to_directory() {
        let (total, curves, _, _) = exact(8, 6);
        let dec = decompose_curves(labels(), (0..8).collect(), grid(6), &total, curves, 3.0, 0.9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = dec.write_dir(dir.path(), "# test\n").unwrap();
        assert!(files.contains(&"common_scores.csv".to_string()));
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["lambda"], "3");
        let scores = std::fs::read_to_string(dir.path().join("common_scores.csv")).unwrap();
        assert_eq!(scores.lines().count(), 1 + 1 + 8);
    }
}

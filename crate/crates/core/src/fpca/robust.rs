//! Two-step robust FPCA: a projection-pursuit initial fit, then binary outlier
//! weights from integrated squared errors, then standard FPCA on the retained years.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{column_mean, fpca_full, is_degenerate, orientation, select_num_components, standard_fpca, truncate, EigenDecomposition};
use crate::error::{Error, Result};
use crate::stats::median;

/// Projection-pursuit estimate used to seed the outlier weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustInitial {
    /// Spatial (L1) median of the curves.
    pub center: DVector<f64>,
    /// p x K directions, orthonormal under the grid inner product.
    pub basis: DMatrix<f64>,
    /// n x K projections of the curves centered at `center`.
    pub scores: DMatrix<f64>,
    /// Squared MAD of the projections on each direction.
    pub scales: Vec<f64>,
    /// Fewer directions than requested could be found.
    pub reduced_rank: bool,
}

/// Weiszfeld iteration for the spatial median of the rows of `z`.
fn spatial_median(z: &DMatrix<f64>) -> DVector<f64> {
    let (n, p) = z.shape();
    let mut m = DVector::from_iterator(
        p,
        z.column_iter().map(|c| median(&c.iter().copied().collect::<Vec<_>>())),
    );
    let scale = z.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let eps = 1e-12 * scale;
    for _ in 0..1000 {
        // Vardi-Zhang modification handles iterates that land on a data point
        let mut num = DVector::zeros(p);
        let mut den = 0.0;
        let mut pull = DVector::zeros(p);
        let mut ties = 0.0;
        for t in 0..n {
            let diff = z.row(t).transpose() - &m;
            let d = diff.norm();
            if d > eps {
                num += z.row(t).transpose() / d;
                den += 1.0 / d;
                pull += diff / d;
            } else {
                ties += 1.0;
            }
        }
        if den == 0.0 {
            break;
        }
        let r = pull.norm();
        if ties > 0.0 && r <= ties {
            break;
        }
        let weiszfeld = num / den;
        let next = if ties > 0.0 {
            let s = ties / r;
            weiszfeld * (1.0 - s) + &m * s.min(1.0)
        } else {
            weiszfeld
        };
        let step = (&next - &m).norm();
        m = next;
        if step <= eps {
            break;
        }
    }
    m
}

fn mad(values: &[f64]) -> f64 {
    let med = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    median(&dev)
}

/// Projection pursuit: at each step pick, among the normalised centered curves, the
/// direction whose projections have the largest median absolute deviation, then
/// remove that direction from every curve.
pub fn robust_initial(curves: &DMatrix<f64>, q: &[f64], num_components: usize) -> Result<RobustInitial> {
    let (n, p) = curves.shape();
    if n < 4 {
        return Err(Error::Input(format!("robust initial fit needs at least 4 curves, got {n}")));
    }
    if q.len() != p {
        return Err(crate::error::shape("quadrature weights do not match curves"));
    }
    let sqrt_q: Vec<f64> = q.iter().map(|v| v.sqrt()).collect();
    let z = DMatrix::from_fn(n, p, |t, i| curves[(t, i)] * sqrt_q[i]);
    let m = spatial_median(&z);
    let centered = DMatrix::from_fn(n, p, |t, i| z[(t, i)] - m[i]);
    let tol = 1e-10 * centered.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);

    let mut work = centered.clone();
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    let mut scales = Vec::new();
    for _ in 0..num_components {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for c in 0..n {
            let row = work.row(c).transpose();
            let norm = row.norm();
            if norm <= tol {
                continue;
            }
            let d = row / norm;
            let proj: Vec<f64> = (0..n).map(|s| work.row(s).dot(&d.transpose())).collect();
            let s = mad(&proj);
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, d));
            }
        }
        let Some((s, d)) = best else { break };
        let proj = &work * &d;
        work -= proj * d.transpose();
        scales.push(s * s);
        dirs.push(d);
    }
    let k = dirs.len();
    let mut basis = DMatrix::zeros(p, k);
    let mut scores = DMatrix::zeros(n, k);
    for (col, d) in dirs.iter().enumerate() {
        let phi: Vec<f64> = (0..p).map(|i| d[i] / sqrt_q[i]).collect();
        let sign = orientation(&phi);
        for i in 0..p {
            basis[(i, col)] = sign * phi[i];
        }
        let proj = &centered * d;
        for t in 0..n {
            scores[(t, col)] = sign * proj[t];
        }
    }
    let center = DVector::from_iterator(p, (0..p).map(|i| m[i] / sqrt_q[i]));
    Ok(RobustInitial {
        center,
        basis,
        scores,
        scales,
        reduced_rank: k < num_components,
    })
}

/// Trapezoidal integral of the squared residual `curve - center - basis * scores`.
pub fn integrated_squared_error(
    curve: &[f64],
    center: &[f64],
    basis: &DMatrix<f64>,
    scores: &[f64],
    q: &[f64],
) -> Result<f64> {
    let p = curve.len();
    if center.len() != p || q.len() != p || basis.nrows() != p || basis.ncols() != scores.len() {
        return Err(crate::error::shape("integrated_squared_error: inconsistent shapes"));
    }
    let mut total = 0.0;
    for i in 0..p {
        let fit: f64 = (0..scores.len()).map(|k| scores[k] * basis[(i, k)]).sum();
        let r = curve[i] - center[i] - fit;
        total += q[i] * r * r;
    }
    Ok(total)
}

/// `w_t = 1` iff `v_t < s + lambda * sqrt(s)`, with `s` the median of `v`.
///
/// An infinite `lambda` keeps every observation.
pub fn outlier_weights(v: &[f64], lambda: f64) -> Result<Vec<bool>> {
    if v.is_empty() {
        return Err(Error::Input("no integrated errors to weight".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Input(format!("lambda must be positive, got {lambda}")));
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::Input("integrated errors must be finite and nonnegative".into()));
    }
    if lambda.is_infinite() {
        return Ok(vec![true; v.len()]);
    }
    let s = median(v);
    let threshold = s + lambda * s.sqrt();
    Ok(v.iter().map(|x| *x < threshold).collect())
}

/// Gaussian efficiency of the binary-weight rule, `Phi(lambda / sqrt(2))`.
pub fn efficiency(lambda: f64) -> f64 {
    if lambda.is_infinite() {
        return 1.0;
    }
    Normal::standard().cdf(lambda / std::f64::consts::SQRT_2)
}

/// Robust FPCA with K chosen on the retained sample by the cumulative-variance rule.
///
/// `lambda = inf` reduces to [`standard_fpca`] on all curves with the given center.
/// Otherwise the returned decomposition is centered at the mean of the retained curves,
/// and scores are reported for every curve.
pub fn robust_fpca(
    curves: &DMatrix<f64>,
    center: &DVector<f64>,
    q: &[f64],
    lambda: f64,
    threshold: f64,
) -> Result<EigenDecomposition> {
    if !(lambda > 0.0) {
        return Err(Error::Input(format!("lambda must be positive, got {lambda}")));
    }
    if lambda.is_infinite() {
        return standard_fpca(curves, center, q, threshold);
    }
    let (n, p) = curves.shape();
    let all = fpca_full(curves, center, q)?;
    if is_degenerate(&all, curves, q) {
        // nothing varies, so no year can be outlying
        return standard_fpca(curves, center, q, threshold);
    }
    let provisional = select_num_components(&all.spectrum, threshold)?
        .max(1)
        .min(n - 1)
        .min(p);
    let init = robust_initial(curves, q, provisional)?;
    let center_init: Vec<f64> = init.center.iter().copied().collect();
    let v: Vec<f64> = (0..n)
        .map(|t| {
            let row: Vec<f64> = curves.row(t).iter().copied().collect();
            let sc: Vec<f64> = init.scores.row(t).iter().copied().collect();
            integrated_squared_error(&row, &center_init, &init.basis, &sc, q)
        })
        .collect::<Result<_>>()?;
    let weights = outlier_weights(&v, lambda)?;
    let keep: Vec<usize> = (0..n).filter(|&t| weights[t]).collect();
    if keep.len() < 2 {
        return Err(Error::RobustnessFailure(format!(
            "only {} of {n} curves retained at lambda = {lambda}; try a larger lambda",
            keep.len()
        )));
    }
    let retained = curves.select_rows(keep.iter());
    let retained_mean = column_mean(&retained);
    let fit = fpca_full(&retained, &retained_mean, q)?;
    let k = if is_degenerate(&fit, &retained, q) {
        0
    } else {
        select_num_components(&fit.spectrum, threshold)?
    }
    .min(keep.len() - 1);
    let fit = truncate(fit, k);
    let weighted = DMatrix::from_fn(n, p, |t, i| (curves[(t, i)] - retained_mean[i]) * q[i]);
    let scores = weighted * &fit.basis;
    Ok(EigenDecomposition {
        mean: retained_mean,
        scores,
        obs_weights: weights,
        integrated_errors: v,
        ..fit
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpca::{fpca, inner};
    use proptest::prelude::*;

    fn q(p: usize) -> Vec<f64> {
        crate::ingest::AgeGrid::single_years(0, p as u32 - 1, false)
            .unwrap()
            .trapezoid_weights()
    }

    fn angle(q: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let c = inner(q, a, b) / (inner(q, a, a) * inner(q, b, b)).sqrt();
        c.abs().min(1.0).acos()
    }

    fn rank_one(n: usize, p: usize) -> (DMatrix<f64>, Vec<f64>) {
        let g: Vec<f64> = (0..p).map(|i| 1.0 + (i as f64 / 5.0).sin()).collect();
        let a: Vec<f64> = (0..n).map(|t| t as f64 - (n - 1) as f64 / 2.0).collect();
        (DMatrix::from_fn(n, p, |t, i| a[t] * g[i]), g)
    }

    fn col(m: &DMatrix<f64>, k: usize) -> Vec<f64> {
        m.column(k).iter().copied().collect()
    }

    #[test]
    fn clean_rank_one_direction() {
        let (curves, g) = rank_one(10, 20);
        let init = robust_initial(&curves, &q(20), 1).unwrap();
        assert!(angle(&q(20), &col(&init.basis, 0), &g) < 1e-6);
        assert!(!init.reduced_rank);
    }

    #[test]
    fn gross_outlier_does_not_capture_the_direction() {
        let p = 20;
        let (mut curves, g) = rank_one(10, p);
        for i in 0..p {
            curves[(9, i)] = 200.0 * ((i as f64) / 3.0).cos();
        }
        let qw = q(p);
        let init = robust_initial(&curves, &qw, 1).unwrap();
        let robust_angle = angle(&qw, &col(&init.basis, 0), &g);
        let plain = fpca(&curves, &column_mean(&curves), &qw, 1).unwrap();
        let plain_angle = angle(&qw, &col(&plain.basis, 0), &g);
        assert!(robust_angle < 1e-3, "{robust_angle}");
        assert!(plain_angle > robust_angle);

        let dec = robust_fpca(&curves, &column_mean(&curves), &qw, 3.0, 0.9).unwrap();
        assert!(!dec.obs_weights[9]);
        assert_eq!(dec.retained(), 9);
        let clean = curves.rows(0, 9).into_owned();
        let clean_fit = fpca(&clean, &column_mean(&clean), &qw, 1).unwrap();
        assert!(angle(&qw, &col(&dec.basis, 0), &col(&clean_fit.basis, 0)) < 1e-6);
        // scores of retained years are centered
        let mean_score: f64 = (0..9).map(|t| dec.scores[(t, 0)]).sum::<f64>() / 9.0;
        assert!(mean_score.abs() < 1e-8);
    }

    #[test]
    fn four_curve_candidate_enumeration() {
        // Four curves on a 3-point grid; brute-force every candidate direction.
        let curves = DMatrix::from_row_slice(4, 3, &[
            1.0, 0.0, 0.5,
            -2.0, 1.0, 0.0,
            0.3, -1.5, 2.0,
            0.0, 0.7, -0.4,
        ]);
        let qw = q(3);
        let init = robust_initial(&curves, &qw, 1).unwrap();

        let sq: Vec<f64> = qw.iter().map(|v| v.sqrt()).collect();
        let z = DMatrix::from_fn(4, 3, |t, i| curves[(t, i)] * sq[i]);
        let m = spatial_median(&z);
        let y = DMatrix::from_fn(4, 3, |t, i| z[(t, i)] - m[i]);
        let mut best = (-1.0, 0usize);
        for c in 0..4 {
            let d = y.row(c).transpose().normalize();
            let proj: Vec<f64> = (0..4).map(|s| y.row(s).dot(&d.transpose())).collect();
            let mut sorted = proj.clone();
            sorted.sort_by(f64::total_cmp);
            let med = 0.5 * (sorted[1] + sorted[2]);
            let mut dev: Vec<f64> = proj.iter().map(|v| (v - med).abs()).collect();
            dev.sort_by(f64::total_cmp);
            let s = 0.5 * (dev[1] + dev[2]);
            if s > best.0 {
                best = (s, c);
            }
        }
        let expected: Vec<f64> = (0..3).map(|i| y[(best.1, i)] / sq[i]).collect();
        assert!(angle(&qw, &col(&init.basis, 0), &expected) < 1e-12);
        assert!((init.scales[0] - best.0 * best.0).abs() < 1e-12);
    }

    #[test]
    fn ise_examples() {
        let p = 101;
        let qw = q(p);
        let basis = DMatrix::from_fn(p, 1, |i, _| (i as f64 / 10.0).sin());
        let curve = vec![1.0; p];
        let center = vec![0.0; p];
        let v = integrated_squared_error(&curve, &center, &basis, &[0.0], &qw).unwrap();
        assert!((v - 100.0).abs() < 1e-12);

        let in_span: Vec<f64> = (0..p).map(|i| 2.5 * basis[(i, 0)] + 0.1).collect();
        let v = integrated_squared_error(&in_span, &vec![0.1; p], &basis, &[2.5], &qw).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn ise_matches_refined_riemann_sum() {
        // Trapezoid on the squared residual equals the integral of its piecewise-linear
        // interpolant; a fine midpoint sum of that interpolant converges to it.
        let ages = [0.0, 0.7, 2.0, 2.5, 4.0];
        let grid = crate::ingest::AgeGrid::new(ages.to_vec(), false).unwrap();
        let qw = grid.trapezoid_weights();
        let curve = [0.3, -1.2, 0.8, 2.2, -0.4];
        let center = [0.1, 0.0, -0.2, 0.5, 0.3];
        let basis = DMatrix::from_column_slice(5, 2, &[0.2, 0.4, -0.1, 0.3, 0.5, 1.0, -0.5, 0.25, 0.0, 0.1]);
        let scores = [1.5, -0.7];
        let v = integrated_squared_error(&curve, &center, &basis, &scores, &qw).unwrap();

        let r2: Vec<f64> = (0..5)
            .map(|i| {
                let r = curve[i] - center[i] - scores[0] * basis[(i, 0)] - scores[1] * basis[(i, 1)];
                r * r
            })
            .collect();
        let refine = 10_000;
        let mut riemann = 0.0;
        for i in 0..4 {
            let h = (ages[i + 1] - ages[i]) / refine as f64;
            for k in 0..refine {
                let s = (k as f64 + 0.5) / refine as f64;
                riemann += h * (r2[i] + s * (r2[i + 1] - r2[i]));
            }
        }
        assert!((v - riemann).abs() < 1e-8, "{v} vs {riemann}");
    }

    #[test]
    fn weight_examples() {
        assert_eq!(outlier_weights(&[1.0, 1.0, 1.0, 100.0], 3.0).unwrap(), vec![true, true, true, false]);
        assert!(outlier_weights(&[2.5; 7], 0.5).unwrap().iter().all(|w| *w));
        assert!(outlier_weights(&[0.1, 3.0, 70.0, 9.0], 1e6).unwrap().iter().all(|w| *w));
        assert!(outlier_weights(&[], 3.0).is_err());
        assert!(outlier_weights(&[1.0], 0.0).is_err());
    }

    #[test]
    fn efficiency_values() {
        for (lambda, eff) in [(3.0, 0.983), (2.33, 0.950), (1.81, 0.900), (3.29, 0.990)] {
            assert!((efficiency(lambda) - eff).abs() < 5e-4, "{lambda}");
        }
        assert_eq!(efficiency(f64::INFINITY), 1.0);
    }

    #[test]
    fn infinite_lambda_is_standard_fpca() {
        let (mut curves, _) = rank_one(8, 10);
        curves[(3, 4)] += 5.0;
        curves[(5, 1)] -= 2.0;
        let qw = q(10);
        let mean = column_mean(&curves);
        let a = robust_fpca(&curves, &mean, &qw, f64::INFINITY, 0.9).unwrap();
        let b = standard_fpca(&curves, &mean, &qw, 0.9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_retained_is_a_failure() {
        // Three identical curves pin the spatial median, so the initial fit is exact
        // for every year, s = 0 and the strict threshold retains nobody.
        let g = [1.0, 2.0, 0.5];
        let curves = DMatrix::from_fn(4, 3, |t, i| if t == 0 { 0.0 } else { g[i] });
        let err = robust_fpca(&curves, &DVector::zeros(3), &q(3), 3.0, 0.9);
        assert!(matches!(err, Err(Error::RobustnessFailure(_))), "{err:?}");
        assert!(robust_fpca(&curves, &DVector::zeros(3), &q(3), f64::INFINITY, 0.9).is_ok());
    }

    #[test]
    fn tiny_lambda_keeps_those_below_the_median() {
        let v: Vec<f64> = (0..10).map(|t| (t * t) as f64 + 0.5).collect();
        let w = outlier_weights(&v, 1e-12).unwrap();
        assert_eq!(w.iter().filter(|x| **x).count(), 5);
    }

    proptest! {
        #[test]
        fn weight_rule(v in prop::collection::vec(0.0f64..100.0, 1..30), lambda in 0.01f64..10.0) {
            let w = outlier_weights(&v, lambda).unwrap();
            let mut s = v.clone();
            s.sort_by(f64::total_cmp);
            let n = s.len();
            let med = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
            for (wt, vt) in w.iter().zip(&v) {
                prop_assert_eq!(*wt, *vt < med + lambda * med.sqrt());
            }
        }
    }

    #[test]
    fn breakdown_with_forty_percent_outliers() {
        use rand::{Rng, SeedableRng};
        let (n, p) = (30, 41);
        let qw = q(p);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g: Vec<f64> = (0..p).map(|i| (i as f64 / 8.0).cos()).collect();
        let mut curves = DMatrix::from_fn(n, p, |t, i| {
            (t as f64 - 15.0) * 0.1 * g[i]
        });
        for v in curves.iter_mut() {
            *v += rng.random_range(-0.01..0.01);
        }
        let n_out = (2 * n) / 5;
        let outliers: Vec<usize> = (0..n).step_by(n / n_out).take(n_out).collect();
        for &t in &outliers {
            let phase: f64 = rng.random_range(0.0..6.0);
            for i in 0..p {
                curves[(t, i)] += 1e3 * (i as f64 / 5.0 + phase).sin();
            }
        }
        let dec = robust_fpca(&curves, &column_mean(&curves), &qw, 3.0, 0.9).unwrap();
        for &t in &outliers {
            assert!(!dec.obs_weights[t], "outlier {t} retained");
        }
    }
}

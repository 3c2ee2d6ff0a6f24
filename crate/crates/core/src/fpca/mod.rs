//! Functional principal component analysis on a discretised age grid.
//!
//! Curves are rows of an `n x p` matrix. Inner products use trapezoidal quadrature
//! weights `q`, so `<f, g> = sum_i q_i f_i g_i` and the basis is orthonormal in
//! that inner product. The covariance operator uses the `1 / (n - 1)` normalisation.

mod robust;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use robust::{
    efficiency, integrated_squared_error, outlier_weights, robust_fpca, robust_initial,
    RobustInitial,
};

/// Default cumulative-variance threshold for choosing the number of components.
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Center subtracted from every curve before projection.
    pub mean: DVector<f64>,
    /// p x K, columns orthonormal under the grid inner product.
    pub basis: DMatrix<f64>,
    /// n x K projections of the centered curves; includes down-weighted years.
    pub scores: DMatrix<f64>,
    /// The K retained eigenvalues, nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// Every empirical eigenvalue of the estimation sample.
    pub spectrum: Vec<f64>,
    pub total_variance: f64,
    /// Binary observation weights; `false` marks a year flagged as outlying.
    pub obs_weights: Vec<bool>,
    /// Integrated squared errors against the robust initial fit (empty for standard fits).
    pub integrated_errors: Vec<f64>,
}

impl EigenDecomposition {
    pub fn num_components(&self) -> usize {
        self.basis.ncols()
    }

    /// `sum_k scores[t, k] * basis[:, k]`, without the mean.
    pub fn component_sum(&self, t: usize) -> DVector<f64> {
        &self.basis * self.scores.row(t).transpose()
    }

    pub fn retained(&self) -> usize {
        self.obs_weights.iter().filter(|w| **w).count()
    }
}

/// Grid inner product.
pub fn inner(q: &[f64], a: &[f64], b: &[f64]) -> f64 {
    q.iter().zip(a).zip(b).map(|((q, a), b)| q * a * b).sum()
}

/// Deterministic sign: the entry of largest magnitude is made positive.
pub(crate) fn orientation(v: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for &x in v {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub(crate) fn column_mean(curves: &DMatrix<f64>) -> DVector<f64> {
    let n = curves.nrows() as f64;
    DVector::from_iterator(
        curves.ncols(),
        curves.column_iter().map(|c| c.iter().sum::<f64>() / n),
    )
}

fn check_shapes(curves: &DMatrix<f64>, center: &DVector<f64>, q: &[f64]) -> Result<()> {
    let p = curves.ncols();
    if center.len() != p || q.len() != p {
        return Err(crate::error::shape(format!(
            "curves have {p} ages, center {} and quadrature {}",
            center.len(),
            q.len()
        )));
    }
    if curves.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("curves contain non-finite values".into()));
    }
    Ok(())
}

/// Full eigen-decomposition: every available component, scores for every curve.
pub(crate) fn fpca_full(
    curves: &DMatrix<f64>,
    center: &DVector<f64>,
    q: &[f64],
) -> Result<EigenDecomposition> {
    check_shapes(curves, center, q)?;
    let (n, p) = curves.shape();
    if n < 2 {
        return Err(Error::Input(format!("fpca needs at least 2 curves, got {n}")));
    }
    let sqrt_q: Vec<f64> = q.iter().map(|v| v.sqrt()).collect();
    let centered = DMatrix::from_fn(n, p, |t, i| curves[(t, i)] - center[i]);
    let norm = 1.0 / ((n - 1) as f64).sqrt();
    let scaled = DMatrix::from_fn(n, p, |t, i| centered[(t, i)] * sqrt_q[i] * norm);

    let svd = scaled.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not return right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let spectrum: Vec<f64> = order.iter().map(|&k| svd.singular_values[k].powi(2)).collect();

    let kmax = order.len();
    let mut basis = DMatrix::zeros(p, kmax);
    for (col, &k) in order.iter().enumerate() {
        let phi: Vec<f64> = (0..p).map(|i| v_t[(k, i)] / sqrt_q[i]).collect();
        let sign = orientation(&phi);
        for i in 0..p {
            basis[(i, col)] = sign * phi[i];
        }
    }
    let weighted = DMatrix::from_fn(n, p, |t, i| centered[(t, i)] * q[i]);
    let scores = weighted * &basis;
    let total_variance = spectrum.iter().sum();
    Ok(EigenDecomposition {
        mean: center.clone(),
        basis,
        scores,
        eigenvalues: spectrum.clone(),
        spectrum,
        total_variance,
        obs_weights: vec![true; n],
        integrated_errors: Vec::new(),
    })
}

pub(crate) fn truncate(mut dec: EigenDecomposition, k: usize) -> EigenDecomposition {
    dec.basis = dec.basis.columns(0, k).into_owned();
    dec.scores = dec.scores.columns(0, k).into_owned();
    dec.eigenvalues.truncate(k);
    dec
}

/// Eigen-decomposition of the sample covariance of `curves - center`, keeping `num_components`.
pub fn fpca(
    curves: &DMatrix<f64>,
    center: &DVector<f64>,
    q: &[f64],
    num_components: usize,
) -> Result<EigenDecomposition> {
    let (n, p) = curves.shape();
    if num_components > (n.saturating_sub(1)).min(p) {
        return Err(Error::Input(format!(
            "{num_components} components requested from {n} curves on {p} ages"
        )));
    }
    Ok(truncate(fpca_full(curves, center, q)?, num_components))
}

/// Smallest K whose leading eigenvalues explain at least a fraction `threshold` of the total.
pub fn select_num_components(eigenvalues: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Input(format!(
            "variance threshold must lie in (0, 1], got {threshold}"
        )));
    }
    if eigenvalues.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::Input("eigenvalues must be nonnegative".into()));
    }
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Input("all eigenvalues are zero".into()));
    }
    let mut cum = 0.0;
    for (k, l) in eigenvalues.iter().enumerate() {
        cum += l;
        if cum / total >= threshold {
            return Ok(k + 1);
        }
    }
    Ok(eigenvalues.len())
}

/// True when the spectrum carries no variance beyond round-off relative to the curves.
pub(crate) fn is_degenerate(dec: &EigenDecomposition, curves: &DMatrix<f64>, q: &[f64]) -> bool {
    let n = curves.nrows() as f64;
    let energy: f64 = curves
        .column_iter()
        .zip(q)
        .map(|(c, w)| w * c.iter().map(|v| v * v).sum::<f64>() / n)
        .sum();
    dec.total_variance <= 1e-24 * (1.0 + energy)
}

/// Standard FPCA with K chosen by the cumulative-variance rule (K = 0 for degenerate data).
pub fn standard_fpca(
    curves: &DMatrix<f64>,
    center: &DVector<f64>,
    q: &[f64],
    threshold: f64,
) -> Result<EigenDecomposition> {
    let full = fpca_full(curves, center, q)?;
    let k = if is_degenerate(&full, curves, q) {
        0
    } else {
        select_num_components(&full.spectrum, threshold)?
    };
    let k = k.min(curves.nrows() - 1);
    Ok(truncate(full, k))
}

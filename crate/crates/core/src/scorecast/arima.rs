//! Automatic ARIMA: KPSS differencing, exact Gaussian likelihood fits started from
//! conditional-sum-of-squares estimates, and a stepwise AICc search.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::optim::minimize;
use super::{FittedParams, Method, ScoreForecast};
use crate::error::{Error, Result};
use crate::stats::mean;

pub const MAX_ORDER: usize = 5;
pub const MAX_DIFF: usize = 2;
/// 5% critical value of the KPSS level-stationarity statistic.
pub const KPSS_CRITICAL: f64 = 0.463;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    /// Mean (d = 0) or drift (d = 1); never used with d = 2.
    pub constant: bool,
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ARIMA({},{},{})", self.p, self.d, self.q)?;
        if self.constant {
            f.write_str(if self.d == 0 { " with mean" } else { " with drift" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaFit {
    pub order: ArimaOrder,
    /// Mean of the differenced series (0 without a constant).
    pub constant: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sigma2: f64,
    pub loglik: f64,
    pub aicc: f64,
    /// One-step innovations of the differenced series.
    pub residuals: Vec<f64>,
    /// Predicted state for the first forecast period (demeaned differenced scale).
    pub state: Vec<f64>,
    /// Every order visited by the search with its AICc.
    pub trace: Vec<(ArimaOrder, f64)>,
}

pub fn difference(y: &[f64], d: usize) -> Vec<f64> {
    let mut w = y.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|v| v[1] - v[0]).collect();
    }
    w
}

/// KPSS statistic for level stationarity with Bartlett long-run variance
/// and `trunc(4 (n / 100)^(1/4))` lags. `None` for a constant series.
pub fn kpss_statistic(y: &[f64]) -> Option<f64> {
    let n = y.len();
    if n < 2 {
        return None;
    }
    let m = mean(y);
    let e: Vec<f64> = y.iter().map(|v| v - m).collect();
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let gamma0 = e.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if gamma0 <= 1e-24 * (1.0 + scale * scale) {
        return None;
    }
    let lags = (4.0 * (n as f64 / 100.0).powf(0.25)) as usize;
    let mut lrv = gamma0;
    for s in 1..=lags.min(n - 1) {
        let g: f64 = (s..n).map(|t| e[t] * e[t - s]).sum::<f64>() / n as f64;
        lrv += 2.0 * (1.0 - s as f64 / (lags + 1) as f64) * g;
    }
    let mut cum = 0.0;
    let mut ss = 0.0;
    for v in &e {
        cum += v;
        ss += cum * cum;
    }
    Some(ss / ((n * n) as f64 * lrv))
}

/// Number of differences: keep differencing while KPSS rejects stationarity.
pub fn select_differences(y: &[f64]) -> usize {
    let mut d = 0;
    while d < MAX_DIFF {
        match kpss_statistic(&difference(y, d)) {
            Some(stat) if stat > KPSS_CRITICAL => d += 1,
            _ => break,
        }
    }
    d
}

/// All roots of `1 - a_1 z - ... - a_k z^k` lie outside the unit circle
/// (Levinson-Durbin step-down: every partial coefficient has modulus < 1).
pub fn is_stationary(a: &[f64]) -> bool {
    let mut a = a.to_vec();
    while let Some(&last) = a.last() {
        if last == 0.0 {
            a.pop();
        } else {
            break;
        }
    }
    while !a.is_empty() {
        let k = a.len();
        let kappa = a[k - 1];
        if !(kappa.abs() < 1.0) {
            return false;
        }
        let den = 1.0 - kappa * kappa;
        a = (0..k - 1).map(|i| (a[i] + kappa * a[k - 2 - i]) / den).collect();
    }
    true
}

/// `1 + b_1 z + ... + b_k z^k` has all roots outside the unit circle.
pub fn is_invertible(b: &[f64]) -> bool {
    let neg: Vec<f64> = b.iter().map(|v| -v).collect();
    is_stationary(&neg)
}

/// Smallest modulus among the roots of `1 - a_1 z - ... - a_k z^k` (infinite for k = 0).
pub fn min_root_modulus(a: &[f64]) -> f64 {
    let k = a.iter().rposition(|v| *v != 0.0).map_or(0, |i| i + 1);
    if k == 0 {
        return f64::INFINITY;
    }
    // eigenvalues of the companion matrix are the inverse roots
    let mut companion = DMatrix::zeros(k, k);
    for i in 0..k {
        companion[(0, i)] = a[i];
        if i + 1 < k {
            companion[(i + 1, i)] = 1.0;
        }
    }
    let largest = companion.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    1.0 / largest
}

/// Models with AR or MA roots this close to the unit circle are not considered.
pub const MIN_ROOT_MODULUS: f64 = 1.01;

fn residuals(w: &[f64], c: f64, ar: &[f64], ma: &[f64], cond: usize) -> Vec<f64> {
    let n = w.len();
    let mut e = vec![0.0; n];
    for t in cond..n {
        let mut v = w[t] - c;
        for (i, phi) in ar.iter().enumerate() {
            v -= phi * (w[t - 1 - i] - c);
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                v -= theta * e[t - 1 - j];
            }
        }
        e[t] = v;
    }
    e
}

/// Conditional sum of squares with the constant profiled out (residuals are affine in it).
fn profiled_css(w: &[f64], ar: &[f64], ma: &[f64], cond: usize, constant: bool) -> f64 {
    let e0 = residuals(w, 0.0, ar, ma, cond);
    if !constant {
        return e0[cond..].iter().map(|v| v * v).sum();
    }
    let e1 = residuals(w, 1.0, ar, ma, cond);
    let (mut num, mut den) = (0.0, 0.0);
    for t in cond..w.len() {
        let g = e1[t] - e0[t];
        num += e0[t] * g;
        den += g * g;
    }
    let c = if den > 0.0 { -num / den } else { 0.0 };
    (cond..w.len()).map(|t| (e0[t] + c * (e1[t] - e0[t])).powi(2)).sum()
}

fn aicc(loglik: f64, k: usize, n: usize) -> f64 {
    let (k, n) = (k as f64, n as f64);
    -2.0 * loglik + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0)
}

/// State-space form of an ARMA(p, q): transition, disturbance loading, dimension.
fn state_space(ar: &[f64], ma: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let r = ar.len().max(ma.len() + 1);
    let mut t = DMatrix::zeros(r, r);
    for (i, a) in ar.iter().enumerate() {
        t[(i, 0)] = *a;
    }
    for i in 0..r - 1 {
        t[(i, i + 1)] = 1.0;
    }
    let mut g = DVector::zeros(r);
    g[0] = 1.0;
    for (j, b) in ma.iter().enumerate() {
        g[j + 1] = *b;
    }
    (t, g)
}

struct Filtered {
    /// Innovations of the data and of a unit series (for the profiled constant).
    v: Vec<f64>,
    v_one: Vec<f64>,
    f: Vec<f64>,
    a: DVector<f64>,
    a_one: DVector<f64>,
}

/// Kalman filter with the stationary initial covariance, run on `w` and on a
/// series of ones; innovations are linear in the data so the constant can be profiled.
fn kalman(w: &[f64], ar: &[f64], ma: &[f64]) -> Option<Filtered> {
    let (t, g) = state_space(ar, ma);
    let r = g.len();
    let q = &g * g.transpose();
    // vec(P) = (I - T kron T)^-1 vec(Q)
    let m = DMatrix::identity(r * r, r * r) - t.kronecker(&t);
    let vec_q = DVector::from_column_slice(q.as_slice());
    let vec_p = m.lu().solve(&vec_q)?;
    let mut p = DMatrix::from_column_slice(r, r, vec_p.as_slice());
    let mut a = DVector::zeros(r);
    let mut a_one = DVector::zeros(r);
    let n = w.len();
    let (mut v, mut v_one, mut f) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &obs in w {
        let ft = p[(0, 0)];
        if !(ft > 0.0) || !ft.is_finite() {
            return None;
        }
        let vt = obs - a[0];
        let vt1 = 1.0 - a_one[0];
        let k = &t * p.column(0) / ft;
        a = &t * &a + &k * vt;
        a_one = &t * &a_one + &k * vt1;
        p = &t * &p * t.transpose() + &q - &k * k.transpose() * ft;
        v.push(vt);
        v_one.push(vt1);
        f.push(ft);
    }
    Some(Filtered { v, v_one, f, a, a_one })
}

struct Likelihood {
    loglik: f64,
    c: f64,
    sigma2: f64,
    filtered: Filtered,
}

/// Exact Gaussian log-likelihood with the constant and the innovation variance profiled out.
fn exact_likelihood(w: &[f64], ar: &[f64], ma: &[f64], constant: bool) -> Option<Likelihood> {
    let filtered = kalman(w, ar, ma)?;
    let n = w.len() as f64;
    let c = if constant {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..w.len() {
            num += filtered.v[i] * filtered.v_one[i] / filtered.f[i];
            den += filtered.v_one[i] * filtered.v_one[i] / filtered.f[i];
        }
        if den > 0.0 { num / den } else { 0.0 }
    } else {
        0.0
    };
    let mut ss = 0.0;
    let mut logdet = 0.0;
    for i in 0..w.len() {
        let e = filtered.v[i] - c * filtered.v_one[i];
        ss += e * e / filtered.f[i];
        logdet += filtered.f[i].ln();
    }
    let sigma2 = ss / n;
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return None;
    }
    let loglik = -0.5 * (n * (2.0 * std::f64::consts::PI * sigma2).ln() + logdet + n);
    Some(Likelihood { loglik, c, sigma2, filtered })
}

fn admissible(ar: &[f64], ma: &[f64]) -> bool {
    is_stationary(ar) && is_invertible(ma)
}

fn fit_order(w: &[f64], order: ArimaOrder) -> Option<ArimaFit> {
    let n = w.len();
    let k = order.p + order.q + order.constant as usize + 1;
    if n < k + 2 {
        return None;
    }
    let (p, q) = (order.p, order.q);
    let start = if p + q == 0 {
        Vec::new()
    } else {
        // conditional least squares gives the starting values
        let css = |x: &[f64]| {
            let (ar, ma) = x.split_at(p);
            if !admissible(ar, ma) {
                return f64::INFINITY;
            }
            profiled_css(w, ar, ma, p, order.constant)
        };
        let zeros = vec![0.0; p + q];
        match minimize(css, &zeros, &vec![0.1; p + q]) {
            Ok((x, _)) if admissible(&x[..p], &x[p..]) => x,
            _ => zeros,
        }
    };
    let coeffs = if p + q == 0 {
        start
    } else {
        let nll = |x: &[f64]| {
            let (ar, ma) = x.split_at(p);
            if !admissible(ar, ma) {
                return f64::INFINITY;
            }
            exact_likelihood(w, ar, ma, order.constant).map_or(f64::INFINITY, |l| -l.loglik)
        };
        minimize(nll, &start, &vec![0.1; p + q]).ok()?.0
    };
    let (ar, ma) = coeffs.split_at(p);
    if !admissible(ar, ma) {
        return None;
    }
    let neg_ma: Vec<f64> = ma.iter().map(|v| -v).collect();
    if min_root_modulus(ar) < MIN_ROOT_MODULUS || min_root_modulus(&neg_ma) < MIN_ROOT_MODULUS {
        return None;
    }
    let lik = exact_likelihood(w, ar, ma, order.constant)?;
    let f = &lik.filtered;
    let residuals = (0..n).map(|i| f.v[i] - lik.c * f.v_one[i]).collect();
    let state = (&f.a - &f.a_one * lik.c).iter().copied().collect();
    Some(ArimaFit {
        order,
        constant: lik.c,
        ar: ar.to_vec(),
        ma: ma.to_vec(),
        sigma2: lik.sigma2,
        loglik: lik.loglik,
        aicc: aicc(lik.loglik, k, n),
        residuals,
        state,
        trace: Vec::new(),
    })
}

/// Stepwise AICc search over `p, q <= 5` after choosing `d` by KPSS tests.
pub fn auto_arima(y: &[f64]) -> Result<ArimaFit> {
    let n = y.len();
    if n < 10 {
        return Err(Error::Input(format!("auto_arima needs at least 10 observations, got {n}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("series contains non-finite values".into()));
    }
    let d = select_differences(y);
    let w = difference(y, d);
    let allow_constant = d <= 1;
    let scale = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let wm = mean(&w);
    if w.iter().all(|v| (v - wm).abs() <= 1e-12 * (1.0 + scale)) {
        // exactly determined: nothing left to model
        let order = ArimaOrder { p: 0, d, q: 0, constant: allow_constant && wm != 0.0 };
        return Ok(ArimaFit {
            order,
            constant: if order.constant { wm } else { 0.0 },
            ar: vec![],
            ma: vec![],
            sigma2: 0.0,
            loglik: f64::INFINITY,
            aicc: f64::NEG_INFINITY,
            residuals: vec![0.0; w.len()],
            state: vec![0.0],
            trace: vec![(order, f64::NEG_INFINITY)],
        });
    }
    let max_order = MAX_ORDER.min(w.len() / 4);

    let mut cache: HashMap<ArimaOrder, Option<ArimaFit>> = HashMap::new();
    let mut trace: Vec<(ArimaOrder, f64)> = Vec::new();
    let mut eval = |o: ArimaOrder, cache: &mut HashMap<ArimaOrder, Option<ArimaFit>>| -> Option<f64> {
        if o.p > max_order || o.q > max_order || (o.constant && !allow_constant) {
            return None;
        }
        if let Some(f) = cache.get(&o) {
            return f.as_ref().map(|f| f.aicc);
        }
        let fit = fit_order(&w, o);
        if let Some(f) = &fit {
            trace.push((o, f.aicc));
        }
        let a = fit.as_ref().map(|f| f.aicc);
        cache.insert(o, fit);
        a
    };

    let mk = |p, q, constant| ArimaOrder { p, d, q, constant };
    let mut starts = vec![
        mk(2, 2, allow_constant),
        mk(0, 0, allow_constant),
        mk(1, 0, allow_constant),
        mk(0, 1, allow_constant),
    ];
    if allow_constant {
        starts.push(mk(0, 0, false));
    }
    let mut best: Option<(ArimaOrder, f64)> = None;
    for o in starts {
        if let Some(a) = eval(o, &mut cache) {
            if best.is_none_or(|(_, b)| a < b) {
                best = Some((o, a));
            }
        }
    }
    let Some(mut current) = best else {
        return Err(Error::CannotFit("no ARIMA candidate could be fitted".into()));
    };
    loop {
        let (o, _) = current;
        let mut neighbours = Vec::new();
        for (dp, dq) in [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, 1), (-1, 1), (1, -1)] {
            let p = o.p as i64 + dp;
            let q = o.q as i64 + dq;
            if p >= 0 && q >= 0 {
                neighbours.push(mk(p as usize, q as usize, o.constant));
            }
        }
        neighbours.push(mk(o.p, o.q, !o.constant));
        let mut moved = false;
        for nb in neighbours {
            if let Some(a) = eval(nb, &mut cache) {
                if a < current.1 {
                    current = (nb, a);
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    let mut fit = cache
        .remove(&current.0)
        .flatten()
        .ok_or_else(|| Error::Numerical("selected ARIMA model vanished from cache".into()))?;
    fit.trace = trace;
    Ok(fit)
}

/// `psi` weights of the integrated model, `psi_0 = 1`.
fn psi_weights(fit: &ArimaFit, count: usize) -> Vec<f64> {
    // AR polynomial of the integrated model: phi(B) (1 - B)^d
    let mut poly = vec![1.0];
    for _ in 0..fit.order.d {
        let mut next = vec![0.0; poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c;
        }
        poly = next;
    }
    let mut phi_poly = vec![1.0];
    phi_poly.extend(fit.ar.iter().map(|a| -a));
    let mut full = vec![0.0; poly.len() + phi_poly.len() - 1];
    for (i, a) in poly.iter().enumerate() {
        for (j, b) in phi_poly.iter().enumerate() {
            full[i + j] += a * b;
        }
    }
    let star: Vec<f64> = full[1..].iter().map(|v| -v).collect();
    let mut psi = vec![0.0; count];
    if count > 0 {
        psi[0] = 1.0;
    }
    for j in 1..count {
        let mut v = if j <= fit.ma.len() { fit.ma[j - 1] } else { 0.0 };
        for (i, s) in star.iter().enumerate() {
            if i < j {
                v += s * psi[j - 1 - i];
            }
        }
        psi[j] = v;
    }
    psi
}

/// Forecasts of the differenced series for `h = 1..horizon`.
fn forecast_differenced(fit: &ArimaFit, horizon: usize) -> Vec<f64> {
    if fit.ar.is_empty() && fit.ma.is_empty() {
        return vec![fit.constant; horizon];
    }
    let (t, _) = state_space(&fit.ar, &fit.ma);
    let mut a = DVector::from_vec(fit.state.clone());
    (0..horizon)
        .map(|_| {
            let v = fit.constant + a[0];
            a = &t * &a;
            v
        })
        .collect()
}

fn integrate(y: &[f64], d: usize, wf: &[f64]) -> Vec<f64> {
    // last value of each difference order 0..d-1
    let mut lasts: Vec<f64> = (0..d).map(|k| *difference(y, k).last().unwrap()).collect();
    wf.iter()
        .map(|&w| {
            let mut v = w;
            for k in (0..d).rev() {
                lasts[k] += v;
                v = lasts[k];
            }
            v
        })
        .collect()
}

/// Point forecasts and forecast-error variances for `h = 1..horizon`.
pub fn arima_forecast(fit: &ArimaFit, y: &[f64], horizon: usize) -> (Vec<f64>, Vec<f64>) {
    let wf = forecast_differenced(fit, horizon);
    let point = integrate(y, fit.order.d, &wf);
    let psi = psi_weights(fit, horizon);
    let mut acc = 0.0;
    let variance = psi
        .iter()
        .map(|p| {
            acc += p * p;
            fit.sigma2 * acc
        })
        .collect();
    (point, variance)
}

/// Limiting per-step change of the point forecast.
pub fn long_run_slope(fit: &ArimaFit, y: &[f64]) -> f64 {
    match fit.order.d {
        0 => 0.0,
        1 => fit.constant,
        _ => {
            let wf = forecast_differenced(fit, 5000);
            *difference(y, 1).last().unwrap() + wf.iter().sum::<f64>()
        }
    }
}

/// Automatic ARIMA forecast, falling back to a random walk with drift if the search fails.
pub fn arima(y: &[f64], horizon: usize) -> Result<ScoreForecast> {
    match auto_arima(y) {
        Ok(fit) => {
            let (point, variance) = arima_forecast(&fit, y, horizon);
            Ok(ScoreForecast {
                method: Method::Arima,
                point,
                variance,
                long_run_slope: long_run_slope(&fit, y),
                params: FittedParams::Arima(fit),
                warning: None,
            })
        }
        Err(e) if !y.iter().any(|v| !v.is_finite()) => {
            let mut f = super::rwf(y, horizon)?;
            f.warning = Some(format!("ARIMA search failed ({e}); used random walk with drift"));
            Ok(f)
        }
        Err(e) => Err(e),
    }
}

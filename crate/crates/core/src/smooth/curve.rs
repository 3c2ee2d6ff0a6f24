use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};

/// Weighted L1 fidelity plus L1 roughness of the slope, evaluated on grid values.
///
/// The slope at `x_i` is the forward difference `(θ_{i+1} - θ_i) / (x_{i+1} - x_i)`,
/// and roughness sums `|slope_{i+1} - slope_i|` over consecutive slopes.
pub fn smoothing_objective(y: &[f64], w: &[f64], ages: &[f64], alpha: f64, theta: &[f64]) -> f64 {
    let fidelity: f64 = y
        .iter()
        .zip(w)
        .zip(theta)
        .filter(|((_, w), _)| **w > 0.0)
        .map(|((y, w), t)| w * (y - t).abs())
        .sum();
    let slopes: Vec<f64> = (0..theta.len().saturating_sub(1))
        .map(|i| (theta[i + 1] - theta[i]) / (ages[i + 1] - ages[i]))
        .collect();
    let roughness: f64 = slopes.windows(2).map(|s| (s[1] - s[0]).abs()).sum();
    fidelity + alpha * roughness
}

/// Minimise [`smoothing_objective`] subject to `θ_{i+1} >= θ_i` wherever `x_i >= monotone_from`.
///
/// The problem is solved exactly as a linear program with split positive/negative
/// parts for each absolute value. Cells with zero weight do not enter the fidelity
/// term; the roughness penalty fills them in (for `alpha == 0` they are linearly
/// interpolated from their neighbours).
pub fn smooth_curve(
    y: &[f64],
    w: &[f64],
    ages: &[f64],
    alpha: f64,
    monotone_from: f64,
) -> Result<Vec<f64>> {
    let p = y.len();
    if w.len() != p || ages.len() != p {
        return Err(crate::error::shape(format!(
            "smooth_curve: {} values, {} weights, {} ages",
            p,
            w.len(),
            ages.len()
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Input(format!("smoothing parameter must be >= 0, got {alpha}")));
    }
    if w.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::Input("weights must be finite and nonnegative".into()));
    }
    let active: Vec<usize> = (0..p).filter(|&i| w[i] > 0.0).collect();
    if active.len() < 2 {
        return Err(Error::CannotFit(format!(
            "need at least 2 positively weighted cells, found {}",
            active.len()
        )));
    }
    if let Some(&i) = active.iter().find(|&&i| !y[i].is_finite()) {
        return Err(Error::Input(format!("non-finite value at weighted cell {i}")));
    }

    // Solve around a reference level so that shifting the data shifts the fit.
    let mut sorted: Vec<f64> = active.iter().map(|&i| y[i]).collect();
    sorted.sort_by(f64::total_cmp);
    let level = sorted[sorted.len() / 2];

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let theta: Vec<Variable> = (0..p)
        .map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for &i in &active {
        let up = lp.add_var(w[i], (0.0, f64::INFINITY));
        let down = lp.add_var(w[i], (0.0, f64::INFINITY));
        lp.add_constraint(
            [(theta[i], 1.0), (up, -1.0), (down, 1.0)],
            ComparisonOp::Eq,
            y[i] - level,
        );
    }
    if alpha > 0.0 {
        for i in 0..p.saturating_sub(2) {
            let h0 = ages[i + 1] - ages[i];
            let h1 = ages[i + 2] - ages[i + 1];
            let up = lp.add_var(alpha, (0.0, f64::INFINITY));
            let down = lp.add_var(alpha, (0.0, f64::INFINITY));
            lp.add_constraint(
                [
                    (theta[i], 1.0 / h0),
                    (theta[i + 1], -1.0 / h0 - 1.0 / h1),
                    (theta[i + 2], 1.0 / h1),
                    (up, -1.0),
                    (down, 1.0),
                ],
                ComparisonOp::Eq,
                0.0,
            );
        }
    }
    for i in 0..p - 1 {
        if ages[i] >= monotone_from {
            lp.add_constraint([(theta[i + 1], 1.0), (theta[i], -1.0)], ComparisonOp::Ge, 0.0);
        }
    }
    let solution = lp
        .solve()
        .map_err(|e| Error::Numerical(format!("smoothing LP failed: {e}")))?
        .into_solution()
        .map_err(|_| Error::Numerical("smoothing LP interrupted".into()))?;
    let mut fit: Vec<f64> = theta.iter().map(|&v| solution.var_value(v)).collect();

    if alpha == 0.0 {
        interpolate_free_cells(&mut fit, w, ages);
    }
    // exact monotonicity on the constrained tail, against solver round-off
    for i in 0..p - 1 {
        if ages[i] >= monotone_from && fit[i + 1] < fit[i] {
            fit[i + 1] = fit[i];
        }
    }
    Ok(fit.into_iter().map(|v| v + level).collect())
}

fn interpolate_free_cells(fit: &mut [f64], w: &[f64], ages: &[f64]) {
    let anchors: Vec<usize> = (0..fit.len()).filter(|&i| w[i] > 0.0).collect();
    let (first, last) = (anchors[0], *anchors.last().unwrap());
    for i in 0..fit.len() {
        if w[i] > 0.0 {
            continue;
        }
        fit[i] = if i < first {
            fit[first]
        } else if i > last {
            fit[last]
        } else {
            let hi = *anchors.iter().find(|&&a| a > i).unwrap();
            let lo = *anchors.iter().rev().find(|&&a| a < i).unwrap();
            let s = (ages[i] - ages[lo]) / (ages[hi] - ages[lo]);
            fit[lo] + s * (fit[hi] - fit[lo])
        };
    }
}

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;

use crate::error::{Error, Result};

struct Objective<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Objective<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let v = (self.0)(p);
        // infeasible points are walls, not errors
        Ok(if v.is_finite() { v } else { 1e300 })
    }
}

/// Nelder-Mead from `start` with an axis-aligned initial simplex of the given step sizes.
/// Restarts once from the best vertex to escape premature collapse.
pub(crate) fn minimize(f: impl Fn(&[f64]) -> f64, start: &[f64], steps: &[f64]) -> Result<(Vec<f64>, f64)> {
    let f = Objective(f);
    let mut best = start.to_vec();
    let mut best_cost = f.cost(&best).unwrap_or(f64::INFINITY);
    if start.is_empty() {
        return Ok((best, best_cost));
    }
    for _ in 0..2 {
        let mut simplex = vec![best.clone()];
        for (i, s) in steps.iter().enumerate() {
            let mut v = best.clone();
            v[i] += s;
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-12)
            .map_err(|e| Error::Numerical(format!("optimizer setup: {e}")))?;
        let res = Executor::new(Objective(&f.0), solver)
            .configure(|state| state.max_iters(4000))
            .run()
            .map_err(|e| Error::Numerical(format!("optimizer failed: {e}")))?;
        let state = res.state();
        if let Some(p) = state.get_best_param() {
            if state.get_best_cost() <= best_cost {
                best_cost = state.get_best_cost();
                best = p.clone();
            }
        }
    }
    if best_cost >= 1e300 {
        return Err(Error::Numerical("optimizer found no feasible point".into()));
    }
    Ok((best, best_cost))
}

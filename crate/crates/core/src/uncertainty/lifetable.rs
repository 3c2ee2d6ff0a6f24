//! Period life tables on single-year age grids.

use crate::error::{Error, Result};

pub const RADIX: f64 = 100_000.0;
/// Average fraction of the first year lived by infants who die.
pub const INFANT_SEPARATION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct LifeTable {
    pub ages: Vec<f64>,
    pub m: Vec<f64>,
    pub a: Vec<f64>,
    pub q: Vec<f64>,
    /// Survivors to the start of each age.
    pub l: Vec<f64>,
    /// Person-years lived in each age.
    pub big_l: Vec<f64>,
    /// Person-years lived beyond the start of each age.
    pub t: Vec<f64>,
    pub e: Vec<f64>,
}

impl LifeTable {
    pub fn e0(&self) -> f64 {
        self.e[0]
    }
}

fn check(m: &[f64], ages: &[f64]) -> Result<()> {
    if m.len() != ages.len() {
        return Err(crate::error::shape(format!("{} rates for {} ages", m.len(), ages.len())));
    }
    if ages.len() < 2 {
        return Err(Error::Input("a life table needs at least two ages".into()));
    }
    for w in ages.windows(2) {
        if w[1] - w[0] != 1.0 {
            return Err(Error::Input(format!("life tables need single-year ages, found {} then {}", w[0], w[1])));
        }
    }
    if let Some(v) = m.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Input(format!("death rates must be finite and non-negative, found {v}")));
    }
    if m[m.len() - 1] <= 0.0 {
        return Err(Error::Input("open age group has a zero death rate; the table cannot be closed".into()));
    }
    Ok(())
}

fn separation(age: f64) -> f64 {
    if age == 0.0 { INFANT_SEPARATION } else { 0.5 }
}

/// Build a life table. The last age is closed as an open interval with `L = l / m`.
pub fn life_table(m: &[f64], ages: &[f64]) -> Result<LifeTable> {
    check(m, ages)?;
    let p = m.len();
    let mut a = vec![0.0; p];
    let mut q = vec![0.0; p];
    let mut l = vec![0.0; p];
    let mut big_l = vec![0.0; p];
    l[0] = RADIX;
    for i in 0..p {
        if i + 1 == p {
            a[i] = 1.0 / m[i];
            q[i] = 1.0;
            big_l[i] = l[i] / m[i];
        } else {
            a[i] = separation(ages[i]);
            q[i] = (m[i] / (1.0 + (1.0 - a[i]) * m[i])).min(1.0);
            l[i + 1] = l[i] * (1.0 - q[i]);
            big_l[i] = l[i + 1] + a[i] * (l[i] - l[i + 1]);
        }
    }
    let mut t = vec![0.0; p];
    let mut acc = 0.0;
    for i in (0..p).rev() {
        acc += big_l[i];
        t[i] = acc;
    }
    let e = (0..p).map(|i| if l[i] > 0.0 { t[i] / l[i] } else { 0.0 }).collect();
    Ok(LifeTable { ages: ages.to_vec(), m: m.to_vec(), a, q, l, big_l, t, e })
}

/// Life expectancy at the first age without building the full table.
pub fn life_expectancy(m: &[f64], ages: &[f64]) -> Result<f64> {
    check(m, ages)?;
    let p = m.len();
    let mut l = 1.0;
    let mut total = 0.0;
    for i in 0..p - 1 {
        let a = separation(ages[i]);
        let q = (m[i] / (1.0 + (1.0 - a) * m[i])).min(1.0);
        let next = l * (1.0 - q);
        total += next + a * (l - next);
        l = next;
    }
    Ok(total + l / m[p - 1])
}

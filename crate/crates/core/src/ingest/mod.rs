//! Mortality data model and ingestion of HMD-style period tables.
//!
//! Rates and exposures are parsed separately ([`parse_rates`], [`parse_exposures`])
//! and then aligned and windowed by [`build_dataset`]. A dataset can be written to
//! and read back from a canonical long-format CSV (see [`canonical`]).

pub mod canonical;
mod hmd;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use hmd::{parse_exposures, parse_rates, ColumnLayout, ColumnSpec, HmdTable, TableColumn};

/// Label of the aggregate (total) series.
pub const TOTAL_LABEL: &str = "T";

/// Ordered ages x_1 < ... < x_p, optionally ending in an open interval such as `100+`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeGrid {
    ages: Vec<f64>,
    open_age_group: bool,
}

impl AgeGrid {
    pub fn new(ages: Vec<f64>, open_age_group: bool) -> Result<Self> {
        if ages.len() < 2 {
            return Err(Error::Input(format!(
                "age grid needs at least 2 ages, got {}",
                ages.len()
            )));
        }
        if ages.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::Input("ages must be finite and nonnegative".into()));
        }
        if ages.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("ages must be strictly increasing".into()));
        }
        Ok(Self {
            ages,
            open_age_group,
        })
    }

    /// Single-year integer ages `from..=to`.
    pub fn single_years(from: u32, to: u32, open_age_group: bool) -> Result<Self> {
        Self::new((from..=to).map(f64::from).collect(), open_age_group)
    }

    pub fn ages(&self) -> &[f64] {
        &self.ages
    }

    pub fn len(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.is_empty()
    }

    pub fn open_age_group(&self) -> bool {
        self.open_age_group
    }

    /// Trapezoidal quadrature weights; `sum_i w_i f(x_i)` approximates the integral over the grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let x = &self.ages;
        let p = x.len();
        (0..p)
            .map(|i| {
                let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
                let right = if i + 1 < p { x[i + 1] - x[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    /// Format an age for output, marking the open group with a trailing `+`.
    pub fn age_label(&self, i: usize) -> String {
        let age = self.ages[i];
        let base = if age.fract() == 0.0 {
            format!("{}", age as i64)
        } else {
            format!("{age}")
        };
        if self.open_age_group && i + 1 == self.ages.len() {
            format!("{base}+")
        } else {
            base
        }
    }
}

/// One population's aligned year x age surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// Central death rates, n x p. Masked cells hold 0.
    pub rates: DMatrix<f64>,
    /// Exposures to risk, n x p. Masked cells hold 0.
    pub exposures: DMatrix<f64>,
    pub mask: DMatrix<bool>,
}

impl Series {
    pub fn is_masked(&self, t: usize, i: usize) -> bool {
        self.mask[(t, i)]
    }

    /// Unmasked cell with zero observed deaths; its log rate is undefined.
    pub fn is_zero_rate(&self, t: usize, i: usize) -> bool {
        !self.mask[(t, i)] && self.rates[(t, i)] == 0.0
    }

    fn head(&self, n: usize) -> Series {
        let p = self.rates.ncols();
        Series {
            label: self.label.clone(),
            rates: self.rates.view((0, 0), (n, p)).into_owned(),
            exposures: self.exposures.view((0, 0), (n, p)).into_owned(),
            mask: self.mask.view((0, 0), (n, p)).into_owned(),
        }
    }
}

/// Sex- (or group-) specific mortality surfaces plus the total-population series.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalityDataset {
    pub years: Vec<i32>,
    pub grid: AgeGrid,
    pub populations: Vec<Series>,
    pub total: Series,
}

impl MortalityDataset {
    /// Checks the shared-shape invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.years.len();
        let p = self.grid.len();
        if n == 0 {
            return Err(Error::Structure("dataset has no years".into()));
        }
        if self.years.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::Structure("years are not contiguous".into()));
        }
        if self.populations.is_empty() {
            return Err(Error::Structure("dataset has no populations".into()));
        }
        for s in self.all_series() {
            let dims = [s.rates.shape(), s.exposures.shape(), s.mask.shape()];
            if dims.iter().any(|d| *d != (n, p)) {
                return Err(Error::Shape(format!(
                    "series {} does not match {n} years x {p} ages",
                    s.label
                )));
            }
            for t in 0..n {
                for i in 0..p {
                    if s.mask[(t, i)] {
                        continue;
                    }
                    let (m, e) = (s.rates[(t, i)], s.exposures[(t, i)]);
                    if !(m.is_finite() && m >= 0.0 && e.is_finite() && e > 0.0) {
                        return Err(Error::Input(format!(
                            "series {} year {} age {}: invalid unmasked cell (rate {m}, exposure {e})",
                            s.label,
                            self.years[t],
                            self.grid.age_label(i)
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn n_ages(&self) -> usize {
        self.grid.len()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.populations.iter().map(|s| s.label.as_str()).collect()
    }

    /// Populations followed by the total series.
    pub fn all_series(&self) -> impl Iterator<Item = &Series> {
        self.populations.iter().chain(std::iter::once(&self.total))
    }

    pub fn series(&self, label: &str) -> Option<&Series> {
        self.all_series().find(|s| s.label == label)
    }

    /// The first `n` years (a training prefix).
    pub fn head(&self, n: usize) -> Result<MortalityDataset> {
        if n == 0 || n > self.n_years() {
            return Err(Error::Input(format!(
                "cannot take {n} of {} years",
                self.n_years()
            )));
        }
        Ok(MortalityDataset {
            years: self.years[..n].to_vec(),
            grid: self.grid.clone(),
            populations: self.populations.iter().map(|s| s.head(n)).collect(),
            total: self.total.head(n),
        })
    }
}

/// Align parsed rates and exposures and restrict them to ages in `[age_min, age_max]`.
///
/// A cell is masked when its rate or exposure is missing or its exposure is zero.
pub fn build_dataset(
    rates: &HmdTable,
    exposures: &HmdTable,
    age_min: f64,
    age_max: f64,
) -> Result<MortalityDataset> {
    if rates.years != exposures.years {
        return Err(Error::Structure(format!(
            "year mismatch: rates cover {}..{}, exposures cover {}..{}",
            rates.years.first().unwrap_or(&0),
            rates.years.last().unwrap_or(&0),
            exposures.years.first().unwrap_or(&0),
            exposures.years.last().unwrap_or(&0)
        )));
    }
    if rates.grid.ages() != exposures.grid.ages() {
        return Err(Error::Structure(
            "rates and exposures use different age grids".into(),
        ));
    }
    if age_min >= age_max {
        return Err(Error::Input(format!(
            "empty age window [{age_min}, {age_max}]"
        )));
    }
    let keep: Vec<usize> = rates
        .grid
        .ages()
        .iter()
        .enumerate()
        .filter(|(_, a)| **a >= age_min && **a <= age_max)
        .map(|(i, _)| i)
        .collect();
    if keep.len() < 2 {
        return Err(Error::Input(format!(
            "age window [{age_min}, {age_max}] keeps {} ages",
            keep.len()
        )));
    }
    let last = rates.grid.len() - 1;
    let open = rates.grid.open_age_group() && keep.last() == Some(&last);
    let grid = AgeGrid::new(keep.iter().map(|&i| rates.grid.ages()[i]).collect(), open)?;

    let n = rates.years.len();
    let p = keep.len();
    let mut populations = Vec::new();
    let mut total = None;
    for rc in &rates.columns {
        let ec = exposures
            .columns
            .iter()
            .find(|c| c.label == rc.label)
            .ok_or_else(|| {
                Error::Structure(format!("exposures lack population {}", rc.label))
            })?;
        let mut r = DMatrix::zeros(n, p);
        let mut e = DMatrix::zeros(n, p);
        let mut mask = DMatrix::from_element(n, p, false);
        for t in 0..n {
            for (jj, &i) in keep.iter().enumerate() {
                let masked = rc.mask[(t, i)] || ec.mask[(t, i)] || ec.values[(t, i)] == 0.0;
                if masked {
                    mask[(t, jj)] = true;
                } else {
                    r[(t, jj)] = rc.values[(t, i)];
                    e[(t, jj)] = ec.values[(t, i)];
                }
            }
        }
        let series = Series {
            label: rc.label.clone(),
            rates: r,
            exposures: e,
            mask,
        };
        if rc.is_total {
            total = Some(series);
        } else {
            populations.push(series);
        }
    }
    let total = total.ok_or_else(|| Error::Structure("no total column in layout".into()))?;
    let ds = MortalityDataset {
        years: rates.years.clone(),
        grid,
        populations,
        total,
    };
    ds.validate()?;
    Ok(ds)
}

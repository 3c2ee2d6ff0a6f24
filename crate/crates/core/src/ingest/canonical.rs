//! Canonical long-format CSV: `population,year,age,rate,exposure,masked`.
//!
//! Masked cells carry `.` in the rate and exposure columns. The open age group is
//! written with a trailing `+`. Values use Rust's shortest round-trip float
//! formatting, so reading back an export reproduces the dataset exactly.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::{AgeGrid, MortalityDataset, Series, TOTAL_LABEL};
use crate::error::{Error, Result};

pub const HEADER: &str = "population,year,age,rate,exposure,masked";

pub fn to_csv(ds: &MortalityDataset) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for s in ds.all_series() {
        for (t, year) in ds.years.iter().enumerate() {
            for i in 0..ds.n_ages() {
                let age = ds.grid.age_label(i);
                if s.mask[(t, i)] {
                    let _ = writeln!(out, "{},{year},{age},.,.,1", s.label);
                } else {
                    let _ = writeln!(
                        out,
                        "{},{year},{age},{},{},0",
                        s.label,
                        s.rates[(t, i)],
                        s.exposures[(t, i)]
                    );
                }
            }
        }
    }
    out
}

struct Cell {
    year: i32,
    age: f64,
    open: bool,
    rate: f64,
    exposure: f64,
    masked: bool,
}

fn field<'a>(fields: &[&'a str], i: usize, line: usize) -> Result<&'a str> {
    fields.get(i).copied().ok_or(Error::Parse {
        line,
        message: "missing field".into(),
    })
}

/// Comment lines starting with `#` are skipped.
pub fn from_csv(text: &str) -> Result<MortalityDataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        Some((i, _)) => {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected header `{HEADER}`"),
            })
        }
        None => return Err(Error::Structure("no data rows".into())),
    }
    let mut groups: Vec<(String, Vec<Cell>)> = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let f: Vec<&str> = raw.trim().split(',').collect();
        if f.len() != 6 {
            return Err(Error::Parse {
                line,
                message: format!("expected 6 fields, found {}", f.len()),
            });
        }
        let label = field(&f, 0, line)?;
        let year = field(&f, 1, line)?.parse::<i32>().map_err(|_| Error::Parse {
            line,
            message: "invalid year".into(),
        })?;
        let age_tok = field(&f, 2, line)?;
        let (age_str, open) = match age_tok.strip_suffix('+') {
            Some(a) => (a, true),
            None => (age_tok, false),
        };
        let age = age_str.parse::<f64>().map_err(|_| Error::Parse {
            line,
            message: format!("invalid age `{age_tok}`"),
        })?;
        let masked = match f[5] {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("invalid masked flag `{other}`"),
                })
            }
        };
        let num = |s: &str, what: &str| -> Result<f64> {
            if masked {
                return Ok(0.0);
            }
            s.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid {what} `{s}`"),
            })
        };
        let cell = Cell {
            year,
            age,
            open,
            rate: num(f[3], "rate")?,
            exposure: num(f[4], "exposure")?,
            masked,
        };
        match groups.iter_mut().find(|(l, _)| l == label) {
            Some((_, cells)) => cells.push(cell),
            None => groups.push((label.to_string(), vec![cell])),
        }
    }
    if groups.is_empty() {
        return Err(Error::Structure("no data rows".into()));
    }

    let first = &groups[0].1;
    let y0 = first[0].year;
    let ages: Vec<(f64, bool)> = first
        .iter()
        .take_while(|c| c.year == y0)
        .map(|c| (c.age, c.open))
        .collect();
    let p = ages.len();
    let open = ages[p - 1].1;
    let grid = AgeGrid::new(ages.iter().map(|a| a.0).collect(), open)?;
    let n = first.len() / p;
    let years: Vec<i32> = (0..n).map(|t| first[t * p].year).collect();

    let mut populations = Vec::new();
    let mut total = None;
    for (label, cells) in groups {
        if cells.len() != n * p {
            return Err(Error::Structure(format!(
                "population {label} has {} cells, expected {}",
                cells.len(),
                n * p
            )));
        }
        let mut rates = DMatrix::zeros(n, p);
        let mut exposures = DMatrix::zeros(n, p);
        let mut mask = DMatrix::from_element(n, p, false);
        for (k, c) in cells.iter().enumerate() {
            let (t, i) = (k / p, k % p);
            if c.year != years[t] || c.age != ages[i].0 || c.open != ages[i].1 {
                return Err(Error::Structure(format!(
                    "population {label}: cell {k} out of canonical order"
                )));
            }
            rates[(t, i)] = c.rate;
            exposures[(t, i)] = c.exposure;
            mask[(t, i)] = c.masked;
        }
        let s = Series {
            label: label.clone(),
            rates,
            exposures,
            mask,
        };
        if label == TOTAL_LABEL {
            total = Some(s);
        } else {
            populations.push(s);
        }
    }
    let ds = MortalityDataset {
        years,
        grid,
        populations,
        total: total.ok_or_else(|| {
            Error::Structure(format!("no `{TOTAL_LABEL}` (total) population"))
        })?,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dataset(n: usize, p: usize, cells: &[(f64, f64, bool)]) -> MortalityDataset {
        let mk = |label: &str, offset: usize| {
            let mut rates = DMatrix::zeros(n, p);
            let mut exposures = DMatrix::zeros(n, p);
            let mut mask = DMatrix::from_element(n, p, false);
            for t in 0..n {
                for i in 0..p {
                    let (r, e, m) = cells[(offset + t * p + i) % cells.len()];
                    if m {
                        mask[(t, i)] = true;
                    } else {
                        rates[(t, i)] = r;
                        exposures[(t, i)] = e;
                    }
                }
            }
            Series { label: label.into(), rates, exposures, mask }
        };
        MortalityDataset {
            years: (1900..1900 + n as i32).collect(),
            grid: AgeGrid::single_years(0, p as u32 - 1, true).unwrap(),
            populations: vec![mk("F", 0), mk("M", 1)],
            total: mk(TOTAL_LABEL, 2),
        }
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            n in 1usize..5,
            p in 2usize..6,
            cells in prop::collection::vec((0.0f64..2.0, 1e-3f64..1e7, any::<bool>()), 1..40),
        ) {
            let ds = dataset(n, p, &cells);
            let back = from_csv(&to_csv(&ds)).unwrap();
            prop_assert_eq!(back, ds);
        }
    }

    #[test]
    fn rejects_bad_header_and_fields() {
        assert!(from_csv("a,b\n").is_err());
        let text = format!("{HEADER}\nF,1900,0,x,1,0\n");
        assert!(matches!(from_csv(&text), Err(Error::Parse { line: 2, .. })));
    }
}

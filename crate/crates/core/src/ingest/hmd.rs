use nalgebra::DMatrix;

use super::{AgeGrid, TOTAL_LABEL};
use crate::error::{Error, Result};

/// Which whitespace-separated column holds which field.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnLayout {
    pub year: usize,
    pub age: usize,
    pub populations: Vec<ColumnSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub label: String,
    pub column: usize,
    pub is_total: bool,
}

impl Default for ColumnLayout {
    /// The 1x1 layout: `Year Age Female Male Total`.
    fn default() -> Self {
        let spec = |label: &str, column, is_total| ColumnSpec {
            label: label.to_string(),
            column,
            is_total,
        };
        Self {
            year: 0,
            age: 1,
            populations: vec![
                spec("F", 2, false),
                spec("M", 3, false),
                spec(TOTAL_LABEL, 4, true),
            ],
        }
    }
}

impl ColumnLayout {
    fn width(&self) -> usize {
        self.populations
            .iter()
            .map(|p| p.column)
            .chain([self.year, self.age])
            .max()
            .unwrap_or(0)
            + 1
    }
}

/// A parsed year x age table, one matrix per population column.
#[derive(Debug, Clone, PartialEq)]
pub struct HmdTable {
    pub years: Vec<i32>,
    pub grid: AgeGrid,
    pub columns: Vec<TableColumn>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableColumn {
    pub label: String,
    pub is_total: bool,
    /// n x p values; masked cells hold 0.
    pub values: DMatrix<f64>,
    pub mask: DMatrix<bool>,
}

/// Parse an `Mx_1x1`-style death-rate table.
pub fn parse_rates(text: &str, layout: &ColumnLayout) -> Result<HmdTable> {
    parse_table(text, layout, "rate")
}

/// Parse an `Exposures_1x1`-style table.
pub fn parse_exposures(text: &str, layout: &ColumnLayout) -> Result<HmdTable> {
    parse_table(text, layout, "exposure")
}

struct Row {
    line: usize,
    year: i32,
    age: f64,
    open: bool,
    values: Vec<Option<f64>>,
}

fn parse_age(token: &str) -> Option<(f64, bool)> {
    let (digits, open) = match token.strip_suffix('+') {
        Some(d) => (d, true),
        None => (token, false),
    };
    digits.parse::<u32>().ok().map(|a| (f64::from(a), open))
}

fn parse_table(text: &str, layout: &ColumnLayout, what: &str) -> Result<HmdTable> {
    let width = layout.width();
    let mut header_seen = false;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if !header_seen {
            // title lines precede the column header
            if tokens[0].eq_ignore_ascii_case("year") {
                header_seen = true;
            }
            continue;
        }
        if tokens.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} columns, found {}", tokens.len()),
            });
        }
        let year = tokens[layout.year].parse::<i32>().map_err(|_| Error::Parse {
            line,
            message: format!("invalid year `{}`", tokens[layout.year]),
        })?;
        let (age, open) = parse_age(tokens[layout.age]).ok_or_else(|| Error::Parse {
            line,
            message: format!("invalid age `{}`", tokens[layout.age]),
        })?;
        let mut values = Vec::with_capacity(layout.populations.len());
        for spec in &layout.populations {
            let tok = tokens[spec.column];
            if tok == "." {
                values.push(None);
                continue;
            }
            let v = tok.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric {what} `{tok}`"),
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Parse {
                    line,
                    message: format!("{what} must be finite and nonnegative, got `{tok}`"),
                });
            }
            values.push(Some(v));
        }
        rows.push(Row {
            line,
            year,
            age,
            open,
            values,
        });
    }
    if !header_seen {
        return Err(Error::Structure("missing `Year Age ...` header line".into()));
    }
    if rows.is_empty() {
        return Err(Error::Structure("no data rows".into()));
    }

    // ages of the first year define the grid
    let first_year = rows[0].year;
    let ages: Vec<(f64, bool)> = rows
        .iter()
        .take_while(|r| r.year == first_year)
        .map(|r| (r.age, r.open))
        .collect();
    let p = ages.len();
    if ages[..p - 1].iter().any(|(_, open)| *open) {
        return Err(Error::Structure(
            "open age group must be the last age".into(),
        ));
    }
    let grid = AgeGrid::new(ages.iter().map(|a| a.0).collect(), ages[p - 1].1)
        .map_err(|e| Error::Structure(e.to_string()))?;
    if rows.len() % p != 0 {
        return Err(Error::Structure(format!(
            "{} rows do not divide into years of {p} ages",
            rows.len()
        )));
    }
    let n = rows.len() / p;
    let mut years: Vec<i32> = Vec::with_capacity(n);
    let mut columns: Vec<TableColumn> = layout
        .populations
        .iter()
        .map(|spec| TableColumn {
            label: spec.label.clone(),
            is_total: spec.is_total,
            values: DMatrix::zeros(n, p),
            mask: DMatrix::from_element(n, p, false),
        })
        .collect();
    for (t, chunk) in rows.chunks(p).enumerate() {
        let year = chunk[0].year;
        if let Some(&prev) = years.last() {
            if year != prev + 1 {
                return Err(Error::Structure(format!(
                    "years are not contiguous: {prev} followed by {year} (line {})",
                    chunk[0].line
                )));
            }
        }
        for (i, row) in chunk.iter().enumerate() {
            if row.year != year || row.age != ages[i].0 || row.open != ages[i].1 {
                return Err(Error::Structure(format!(
                    "line {}: year {} does not repeat the age grid of year {first_year}",
                    row.line, row.year
                )));
            }
            for (c, v) in row.values.iter().enumerate() {
                match v {
                    Some(v) => columns[c].values[(t, i)] = *v,
                    None => columns[c].mask[(t, i)] = true,
                }
            }
        }
        years.push(year);
    }
    Ok(HmdTable {
        years,
        grid,
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "United Kingdom, Death rates (period 1x1)\n\n  Year          Age             Female            Male           Total\n";

    #[test]
    fn parses_a_row_verbatim() {
        let text = format!("{HEADER}  1950  0  0.03  0.04  0.035\n  1950  1  0.01  0.02  0.015\n");
        let t = parse_rates(&text, &ColumnLayout::default()).unwrap();
        assert_eq!(t.years, vec![1950]);
        assert_eq!(t.grid.ages(), &[0.0, 1.0]);
        assert_eq!(t.columns[0].label, "F");
        assert_eq!(t.columns[0].values[(0, 0)], 0.03);
        assert_eq!(t.columns[1].values[(0, 0)], 0.04);
        assert_eq!(t.columns[2].values[(0, 0)], 0.035);
        assert!(t.columns[2].is_total);
    }

    #[test]
    fn missing_tokens_mask_open_group() {
        let text = format!("{HEADER}1950 109 0.5 0.6 0.55\n1950  110+  .  .  .\n");
        let t = parse_rates(&text, &ColumnLayout::default()).unwrap();
        assert!(t.grid.open_age_group());
        assert_eq!(t.grid.ages()[1], 110.0);
        for c in &t.columns {
            assert!(c.mask[(0, 1)]);
            assert!(!c.mask[(0, 0)]);
        }
    }

    #[test]
    fn non_contiguous_years() {
        let text = format!("{HEADER}1950 0 .1 .1 .1\n1950 1 .1 .1 .1\n1952 0 .1 .1 .1\n1952 1 .1 .1 .1\n");
        let err = parse_rates(&text, &ColumnLayout::default()).unwrap_err();
        assert!(matches!(err, Error::Structure(ref m) if m.contains("contiguous")), "{err}");
    }

    #[test]
    fn exposure_row_and_errors() {
        let text = format!("{HEADER}1950  30  250000.5  240000.0  490000.5\n1950 31 1 1 2\n");
        let t = parse_exposures(&text, &ColumnLayout::default()).unwrap();
        assert_eq!(t.columns[0].values[(0, 0)], 250000.5);
        assert_eq!(t.columns[1].values[(0, 0)], 240000.0);
        assert_eq!(t.columns[2].values[(0, 0)], 490000.5);

        let neg = format!("{HEADER}1950 30 -5 1 1\n");
        let err = parse_exposures(&neg, &ColumnLayout::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");

        let err = parse_exposures("", &ColumnLayout::default()).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
        let err = parse_exposures(HEADER, &ColumnLayout::default()).unwrap_err();
        assert!(err.to_string().contains("no data rows"));
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let text = format!("{HEADER}1950 0 0.1 0.1\n");
        assert!(matches!(
            parse_rates(&text, &ColumnLayout::default()),
            Err(Error::Parse { line: 4, .. })
        ));
        let text = format!("{HEADER}1950 0 0.1 abc 0.1\n");
        let err = parse_rates(&text, &ColumnLayout::default()).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
    }

    #[test]
    fn custom_layout() {
        let layout = ColumnLayout {
            year: 1,
            age: 0,
            populations: vec![
                ColumnSpec { label: "T".into(), column: 2, is_total: true },
                ColumnSpec { label: "A".into(), column: 3, is_total: false },
            ],
        };
        let text = "Year-ish\nyear age t a\n0 2001 0.2 0.1\n1 2001 0.3 0.2\n";
        let t = parse_rates(text, &layout).unwrap();
        assert_eq!(t.years, vec![2001]);
        assert_eq!(t.columns[1].values[(0, 1)], 0.2);
    }
}

//! Method and tuning-constant comparison with table-shaped exports.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::metrics::PointMetric;
use super::window::{actuals, score_windows, window_train_lengths, HorizonMetrics, WindowForecast, WindowResult};
use crate::error::{Error, Result};
use crate::ingest::MortalityDataset;
use crate::multilevel::decompose;
use crate::pipeline::{forecast_decomposition, ForecastSettings};
use crate::scorecast::Method;
use crate::smooth::{smooth_dataset, SmoothConfig};
use crate::uncertainty::format_lambda;

pub const DEFAULT_LAMBDAS: [f64; 5] = [1.81, 2.33, 3.0, 3.29, f64::INFINITY];
/// Mortality errors and scores are reported multiplied by this factor.
pub const MORTALITY_SCALE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub smooth: SmoothConfig,
    pub lambdas: Vec<f64>,
    pub methods: Vec<Method>,
    pub threshold: f64,
    pub replicates: usize,
    pub seed: u64,
    pub test_len: usize,
    /// Interval tail probability.
    pub alpha: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            smooth: SmoothConfig::default(),
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            methods: Method::ALL.to_vec(),
            threshold: crate::fpca::DEFAULT_VARIANCE_THRESHOLD,
            replicates: crate::uncertainty::DEFAULT_REPLICATES,
            seed: 1,
            test_len: 30,
            alpha: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportEntry {
    pub method: Method,
    pub lambda: f64,
    pub population: String,
    pub horizons: Vec<HorizonMetrics>,
}

impl ReportEntry {
    /// Mean over horizons of a per-horizon value.
    pub fn average(&self, f: impl Fn(&HorizonMetrics) -> f64) -> f64 {
        self.horizons.iter().map(f).sum::<f64>() / self.horizons.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub config: EvalConfig,
    pub labels: Vec<String>,
    pub first_year: i32,
    pub last_year: i32,
    pub entries: Vec<ReportEntry>,
}

/// Every window forecast for every (lambda, method), sharing smoothing and decompositions.
pub fn compare_methods(ds: &MortalityDataset, cfg: &EvalConfig) -> Result<EvaluationReport> {
    if cfg.lambdas.is_empty() || cfg.methods.is_empty() {
        return Err(Error::Input("need at least one lambda and one method".into()));
    }
    if let Some(l) = cfg.lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::Input(format!("lambda must be positive, got {l}")));
    }
    let n = ds.n_years();
    let lengths = window_train_lengths(n, cfg.test_len)?;
    let smoothed = smooth_dataset(ds, &cfg.smooth)?;
    let act = actuals(ds, &smoothed)?;

    // per window: [lambda][method]
    let per_window: Vec<Vec<Vec<WindowForecast>>> = lengths
        .par_iter()
        .map(|&len| {
            let sm = smoothed.head(len)?;
            let horizon = n - len;
            cfg.lambdas
                .iter()
                .map(|&lambda| {
                    let dec = decompose(&sm, lambda, cfg.threshold)
                        .map_err(|e| e.context(format!("window ending {}, lambda {}", ds.years[len - 1], format_lambda(lambda))))?;
                    cfg.methods
                        .iter()
                        .map(|&method| {
                            let settings = ForecastSettings {
                                lambda,
                                threshold: cfg.threshold,
                                method,
                                horizon,
                                replicates: cfg.replicates,
                                seed: cfg.seed,
                            };
                            let (_, bundle) = forecast_decomposition(&dec, &sm, &settings)?;
                            WindowForecast::from_bundle(&bundle, cfg.alpha)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let labels: Vec<String> = ds.populations.iter().map(|s| s.label.clone()).collect();
    let mut entries = Vec::new();
    for (li, &lambda) in cfg.lambdas.iter().enumerate() {
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let results: Vec<WindowResult> = lengths
                .iter()
                .zip(&per_window)
                .map(|(&len, w)| WindowResult { train_len: len, forecast: w[li][mi].clone() })
                .collect();
            let scored = score_windows(&results, &act, cfg.alpha, cfg.test_len)?;
            for (label, horizons) in labels.iter().zip(scored) {
                entries.push(ReportEntry { method, lambda, population: label.clone(), horizons });
            }
        }
    }
    Ok(EvaluationReport {
        config: cfg.clone(),
        labels,
        first_year: ds.years[0],
        last_year: ds.years[n - 1],
        entries,
    })
}

/// A table value: mortality or life expectancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Mortality,
    LifeExpectancy,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::Mortality, Measure::LifeExpectancy];

    fn prefix(&self) -> &'static str {
        match self {
            Measure::Mortality => "mortality",
            Measure::LifeExpectancy => "e0",
        }
    }

    fn scale(&self) -> f64 {
        match self {
            Measure::Mortality => MORTALITY_SCALE,
            Measure::LifeExpectancy => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalStat {
    Max,
    Mean,
}

impl IntervalStat {
    pub const ALL: [IntervalStat; 2] = [IntervalStat::Max, IntervalStat::Mean];

    pub fn name(&self) -> &'static str {
        match self {
            IntervalStat::Max => "Max interval score",
            IntervalStat::Mean => "Mean interval score",
        }
    }
}

/// One table row: values per lambda for each measure, and the index of the best lambda.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub metric: String,
    pub method: Method,
    pub population: String,
    /// `[measure][lambda]`, display-scaled.
    pub values: [Vec<f64>; 2],
    pub best: [usize; 2],
}

impl EvaluationReport {
    pub fn entry(&self, method: Method, lambda: f64, population: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.method == method && e.lambda == lambda && e.population == population)
    }

    fn rows(&self, metrics: &[(String, Box<dyn Fn(&HorizonMetrics, Measure) -> f64 + '_>, bool)]) -> Vec<TableRow> {
        let mut rows = Vec::new();
        for (name, get, absolute) in metrics {
            for &method in &self.config.methods {
                for label in &self.labels {
                    let mut values: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
                    let mut best = [0; 2];
                    for (mi, measure) in Measure::ALL.iter().enumerate() {
                        for &lambda in &self.config.lambdas {
                            let e = self.entry(method, lambda, label).expect("every cell is evaluated");
                            values[mi].push(measure.scale() * e.average(|h| get(h, *measure)));
                        }
                        let key = |v: f64| if *absolute { v.abs() } else { v };
                        best[mi] = (0..values[mi].len())
                            .min_by(|a, b| key(values[mi][*a]).total_cmp(&key(values[mi][*b])))
                            .unwrap_or(0);
                    }
                    rows.push(TableRow { metric: name.clone(), method, population: label.clone(), values, best });
                }
            }
        }
        rows
    }

    /// Point accuracy rows in table order; each cell is the mean over horizons.
    pub fn point_rows(&self) -> Vec<TableRow> {
        let metrics: Vec<(String, Box<dyn Fn(&HorizonMetrics, Measure) -> f64>, bool)> = PointMetric::ALL
            .iter()
            .map(|&m| {
                let get: Box<dyn Fn(&HorizonMetrics, Measure) -> f64> = Box::new(move |h: &HorizonMetrics, measure: Measure| match measure {
                    Measure::Mortality => m.get(&h.mortality),
                    Measure::LifeExpectancy => m.get(&h.e0),
                });
                (m.name().to_string(), get, m == PointMetric::Mfe)
            })
            .collect();
        self.rows(&metrics)
    }

    /// Interval score rows (max and mean), each cell averaged over horizons.
    pub fn interval_rows(&self) -> Vec<TableRow> {
        let metrics: Vec<(String, Box<dyn Fn(&HorizonMetrics, Measure) -> f64>, bool)> = IntervalStat::ALL
            .iter()
            .map(|&s| {
                let get: Box<dyn Fn(&HorizonMetrics, Measure) -> f64> = Box::new(move |h: &HorizonMetrics, measure: Measure| {
                    let m = match measure {
                        Measure::Mortality => h.mortality_interval,
                        Measure::LifeExpectancy => h.e0_interval,
                    };
                    match s {
                        IntervalStat::Max => m.max,
                        IntervalStat::Mean => m.mean,
                    }
                });
                (s.name().to_string(), get, false)
            })
            .collect();
        self.rows(&metrics)
    }

    fn table_csv(&self, rows: &[TableRow]) -> String {
        let mut out = String::from("metric,method,population");
        for measure in Measure::ALL {
            for &l in &self.config.lambdas {
                let _ = write!(out, ",{}_{}", measure.prefix(), format_lambda(l));
            }
        }
        out.push_str(",best_mortality_lambda,best_e0_lambda\n");
        for r in rows {
            let _ = write!(out, "{},{},{}", r.metric, r.method, r.population);
            for v in r.values.iter().flatten() {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(
                out,
                ",{},{}",
                format_lambda(self.config.lambdas[r.best[0]]),
                format_lambda(self.config.lambdas[r.best[1]])
            );
        }
        out
    }

    pub fn point_table_csv(&self) -> String {
        self.table_csv(&self.point_rows())
    }

    pub fn interval_table_csv(&self) -> String {
        self.table_csv(&self.interval_rows())
    }

    /// Long format: one row per method, lambda, population, horizon and statistic (unscaled).
    pub fn horizons_csv(&self) -> String {
        let mut out = String::from("method,lambda,population,h,forecasts,cells,measure,statistic,value\n");
        for e in &self.entries {
            for h in &e.horizons {
                let lam = format_lambda(e.lambda);
                let mut row = |measure: &str, stat: &str, v: f64| {
                    let _ = writeln!(out, "{},{lam},{},{},{},{},{measure},{stat},{v}", e.method, e.population, h.h, h.forecasts, h.cells);
                };
                for m in PointMetric::ALL {
                    row("mortality", m.name(), m.get(&h.mortality));
                    row("e0", m.name(), m.get(&h.e0));
                }
                row("mortality", "max_interval_score", h.mortality_interval.max);
                row("mortality", "mean_interval_score", h.mortality_interval.mean);
                row("e0", "max_interval_score", h.e0_interval.max);
                row("e0", "mean_interval_score", h.e0_interval.mean);
            }
        }
        out
    }

    /// Plain-text tables; the smallest value in each row and measure is starred.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "Evaluation {}-{}, test length {}, {} replicates, seed {}\n",
            self.first_year, self.last_year, self.config.test_len, self.config.replicates, self.config.seed
        );
        let _ = writeln!(out, "Mortality values are multiplied by {MORTALITY_SCALE}; * marks the row minimum (MFE by magnitude).");
        for (title, rows) in [("Point forecast accuracy", self.point_rows()), ("Interval forecast accuracy", self.interval_rows())] {
            let _ = writeln!(out, "\n{title}");
            let mut head = format!("{:<20} {:<6} {:<4}", "metric", "method", "pop");
            for measure in Measure::ALL {
                for &l in &self.config.lambdas {
                    let _ = write!(head, " {:>10}", format!("{}:{}", if measure == Measure::Mortality { "m" } else { "e0" }, format_lambda(l)));
                }
            }
            let _ = writeln!(out, "{head}");
            for r in &rows {
                let _ = write!(out, "{:<20} {:<6} {:<4}", r.metric, r.method.to_string(), r.population);
                for (mi, vals) in r.values.iter().enumerate() {
                    for (li, v) in vals.iter().enumerate() {
                        let mark = if li == r.best[mi] { "*" } else { " " };
                        let _ = write!(out, " {:>9.3}{mark}", v);
                    }
                }
                out.push('\n');
            }
        }
        out
    }

    /// Write the tables, the long per-horizon file and the text summary.
    pub fn write_dir(&self, dir: &Path, header: &str) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let files = [
            ("point_accuracy.csv", self.point_table_csv()),
            ("interval_accuracy.csv", self.interval_table_csv()),
            ("horizons.csv", self.horizons_csv()),
            ("summary.txt", self.summary()),
        ];
        for (name, body) in &files {
            std::fs::write(dir.join(name), format!("{header}{body}"))?;
        }
        Ok(files.iter().map(|(n, _)| n.to_string()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn small_report(lambdas: Vec<f64>, methods: Vec<Method>) -> EvaluationReport {
        let d = generate(&SynthConfig { n: 24, p: 11, horizon: 1, common_eigenvalues: vec![4.0], residual_eigenvalues: vec![0.3], ..SynthConfig::default() }).unwrap();
        let cfg = EvalConfig { lambdas, methods, replicates: 50, test_len: 5, ..EvalConfig::default() };
        compare_methods(&d.dataset, &cfg).unwrap()
    }

    #[test]
    fn table_shape() {
        let r = small_report(vec![1.81, f64::INFINITY], vec![Method::Rwf, Method::Ets]);
        let rows = r.point_rows();
        assert_eq!(rows.len(), 5 * 2 * 2);
        assert!(rows.iter().all(|row| row.values[0].len() == 2 && row.values[1].len() == 2));
        assert_eq!(r.interval_rows().len(), 2 * 2 * 2);
        let csv = r.point_table_csv();
        assert!(csv.starts_with("metric,method,population,mortality_1.81,mortality_inf,e0_1.81,e0_inf,"));
        assert_eq!(csv.lines().count(), 21);
        let e = r.entry(Method::Rwf, 1.81, "F").unwrap();
        assert_eq!(e.horizons.len(), 5);
        assert_eq!(e.horizons.iter().map(|h| h.forecasts).sum::<usize>(), 15);
        for h in &e.horizons {
            assert_eq!(h.mortality.max_rsfe, h.mortality.max_afe);
            assert!(h.mortality.rmsfe >= h.mortality.mfe.abs());
        }
        assert!(r.summary().contains('*'));
    }

    #[test]
    fn reports_are_deterministic() {
        let a = small_report(vec![3.0], vec![Method::Rwf]);
        let b = small_report(vec![3.0], vec![Method::Rwf]);
        assert_eq!(a, b);
        assert_eq!(a.horizons_csv(), b.horizons_csv());
    }
}

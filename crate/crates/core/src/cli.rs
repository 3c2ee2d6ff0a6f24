//! The `mortcast` command line.
//!
//! Settings are layered: built-in defaults, then the `--config` file, then
//! `MORTCAST_*` environment variables, then `--set key=value` and the
//! per-command flags. Every file written starts with a comment header naming
//! the crate version, the seed and a hash of the effective configuration.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ingest::{build_dataset, canonical, parse_exposures, parse_rates, ColumnLayout, MortalityDataset};
use crate::multilevel::{coherence_diagnostic, decompose};
use crate::pipeline::forecast_decomposition;
use crate::scorecast::parameters_csv;
use crate::smooth::{self, smooth_dataset};
use crate::synth::generate;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status for bad input, configuration or usage.
pub const EXIT_INPUT: i32 = 1;
/// Exit status for a model that could not be fitted or a numerical breakdown.
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mortcast", version, about = "Robust multilevel functional forecasts of mortality and life expectancy")]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override any configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Leave the generation time out of headers and run.json.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert rate and exposure tables into the canonical long CSV (`data.csv`).
    Ingest(IngestArgs),
    /// Smooth every year's log rates (`smoothed.csv`).
    Smooth(SmoothArgs),
    /// Fit the multilevel decomposition and write its components.
    Fit(FitArgs),
    /// Forecast rates and life expectancy with bootstrap intervals.
    Forecast(ForecastArgs),
    /// Expanding-window accuracy comparison across tuning constants and methods.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic dataset with known structure.
    Simulate(SimulateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Smooth(_) => "smooth",
            Command::Fit(_) => "fit",
            Command::Forecast(_) => "forecast",
            Command::Evaluate(_) => "evaluate",
            Command::Simulate(_) => "simulate",
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct OutArg {
    /// Output directory; nothing is written outside it.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct InputArgs {
    /// Canonical CSV from `ingest` or `simulate`.
    #[arg(long)]
    pub data: Option<String>,
    /// Raw rate table, used with --exposures when --data is absent.
    #[arg(long)]
    pub rates: Option<String>,
    /// Raw exposure table matching --rates.
    #[arg(long)]
    pub exposures: Option<String>,
    /// Youngest age kept.
    #[arg(long)]
    pub age_min: Option<String>,
    /// Oldest age kept; older ages are dropped.
    #[arg(long)]
    pub age_max: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct SmoothingArgs {
    /// Roughness penalty.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Age from which fitted log rates must not decrease (`inf` disables).
    #[arg(long)]
    pub monotone_from: Option<String>,
    /// `poisson` or `binomial`.
    #[arg(long)]
    pub variance_model: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct DecompositionArgs {
    /// Robustness constant; `inf` gives the standard decomposition.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Cumulative variance share that fixes the number of components.
    #[arg(long)]
    pub threshold: Option<String>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw rate table (whitespace-separated Year, Age and one column per population).
    #[arg(long)]
    pub rates: Option<String>,
    /// Raw exposure table matching --rates.
    #[arg(long)]
    pub exposures: Option<String>,
    /// Youngest age kept.
    #[arg(long)]
    pub age_min: Option<String>,
    /// Oldest age kept; older ages are dropped.
    #[arg(long)]
    pub age_max: Option<String>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    #[command(flatten)]
    pub decomposition: DecompositionArgs,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    #[command(flatten)]
    pub decomposition: DecompositionArgs,
    /// `rwf`, `arima` or `ets`.
    #[arg(long)]
    pub method: Option<String>,
    /// Forecast horizon in years.
    #[arg(long)]
    pub horizon: Option<String>,
    /// Bootstrap replicates.
    #[arg(long)]
    pub replicates: Option<String>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<String>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    /// Comma-separated robustness constants, e.g. `1.81,2.33,3,3.29,inf`.
    #[arg(long)]
    pub lambdas: Option<String>,
    /// Comma-separated score methods.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub threshold: Option<String>,
    #[arg(long)]
    pub test_len: Option<String>,
    #[arg(long)]
    pub replicates: Option<String>,
    /// Interval tail probability (0.2 scores 80% intervals).
    #[arg(long)]
    pub interval_alpha: Option<String>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<String>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Random seed.
    #[arg(long)]
    pub seed: Option<String>,
    /// Number of observed years.
    #[arg(long)]
    pub years: Option<String>,
    /// Number of single-year ages starting at 0.
    #[arg(long)]
    pub ages: Option<String>,
    /// Years simulated beyond the observed sample.
    #[arg(long)]
    pub horizon: Option<String>,
    /// Share of years hit by a shock.
    #[arg(long)]
    pub outlier_fraction: Option<String>,
    /// Shock size as a multiple of the common signal scale.
    #[arg(long)]
    pub outlier_magnitude: Option<String>,
    /// `linear` or `ar1`.
    #[arg(long)]
    pub scores: Option<String>,
    #[command(flatten)]
    pub out: OutArg,
}

type Pairs = Vec<(&'static str, Option<String>)>;

impl InputArgs {
    fn pairs(&self) -> Pairs {
        vec![
            ("data", self.data.clone()),
            ("rates", self.rates.clone()),
            ("exposures", self.exposures.clone()),
            ("age_min", self.age_min.clone()),
            ("age_max", self.age_max.clone()),
        ]
    }
}

impl SmoothingArgs {
    fn pairs(&self) -> Pairs {
        vec![
            ("alpha", self.alpha.clone()),
            ("monotone_from", self.monotone_from.clone()),
            ("variance_model", self.variance_model.clone()),
        ]
    }
}

impl DecompositionArgs {
    fn pairs(&self) -> Pairs {
        vec![("lambda", self.lambda.clone()), ("threshold", self.threshold.clone())]
    }
}

impl Command {
    /// Flag values as configuration keys.
    fn overrides(&self) -> Pairs {
        let mut v: Pairs = Vec::new();
        let out = |o: &OutArg| ("out", o.out.clone());
        match self {
            Command::Ingest(a) => {
                v.extend([
                    ("rates", a.rates.clone()),
                    ("exposures", a.exposures.clone()),
                    ("age_min", a.age_min.clone()),
                    ("age_max", a.age_max.clone()),
                    out(&a.out),
                ]);
            }
            Command::Smooth(a) => {
                v.extend(a.input.pairs());
                v.extend(a.smoothing.pairs());
                v.push(out(&a.out));
            }
            Command::Fit(a) => {
                v.extend(a.input.pairs());
                v.extend(a.smoothing.pairs());
                v.extend(a.decomposition.pairs());
                v.push(out(&a.out));
            }
            Command::Forecast(a) => {
                v.extend(a.input.pairs());
                v.extend(a.smoothing.pairs());
                v.extend(a.decomposition.pairs());
                v.extend([
                    ("method", a.method.clone()),
                    ("horizon", a.horizon.clone()),
                    ("replicates", a.replicates.clone()),
                    ("seed", a.seed.clone()),
                    out(&a.out),
                ]);
            }
            Command::Evaluate(a) => {
                v.extend(a.input.pairs());
                v.extend(a.smoothing.pairs());
                v.extend([
                    ("lambdas", a.lambdas.clone()),
                    ("methods", a.methods.clone()),
                    ("threshold", a.threshold.clone()),
                    ("test_len", a.test_len.clone()),
                    ("replicates", a.replicates.clone()),
                    ("interval_alpha", a.interval_alpha.clone()),
                    ("seed", a.seed.clone()),
                    out(&a.out),
                ]);
            }
            Command::Simulate(a) => {
                v.extend([
                    ("seed", a.seed.clone()),
                    ("sim_years", a.years.clone()),
                    ("sim_ages", a.ages.clone()),
                    ("sim_horizon", a.horizon.clone()),
                    ("sim_outlier_fraction", a.outlier_fraction.clone()),
                    ("sim_outlier_magnitude", a.outlier_magnitude.clone()),
                    ("sim_scores", a.scores.clone()),
                    out(&a.out),
                ]);
            }
        }
        v
    }
}

/// Build the effective configuration: defaults, file, environment, then flags.
pub fn resolve_config<E>(cli: &Cli, env: E) -> Result<RunConfig>
where
    E: IntoIterator<Item = (String, String)>,
{
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        cfg.apply_file(&text).map_err(|e| e.context(format!("config file {}", path.display())))?;
    }
    cfg.apply_env(env)?;
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config { field: kv.clone(), message: "--set expects KEY=VALUE".into() })?;
        cfg.set(k, v)?;
    }
    for (k, v) in cli.command.overrides() {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Map an error to the process exit status.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

/// Parse arguments, run, report errors on stderr and return the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli, std::env::vars()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("mortcast {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}

/// Run a parsed command. Returns the files written.
pub fn run<E>(cli: &Cli, env: E) -> Result<Vec<PathBuf>>
where
    E: IntoIterator<Item = (String, String)>,
{
    let cfg = resolve_config(cli, env)?;
    let timestamp = if cli.no_timestamp {
        None
    } else {
        Some(SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
    };
    let exec = || execute(&cli.command, &cfg, timestamp);
    match cli.jobs {
        Some(0) => Err(Error::Config { field: "jobs".into(), message: "must be at least 1".into() }),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Input(format!("cannot start {n} worker threads: {e}")))?
            .install(exec),
        None => exec(),
    }
}

/// Comment header put at the top of every CSV output.
pub fn metadata_header(cfg: &RunConfig, timestamp: Option<u64>) -> String {
    let mut h = format!("# mortcast {VERSION} seed={} config={}", cfg.seed, cfg.hash());
    if let Some(t) = timestamp {
        let _ = write!(h, " generated_unix={t}");
    }
    h.push('\n');
    h
}

struct Output {
    dir: PathBuf,
    header: String,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(cfg: &RunConfig, timestamp: Option<u64>) -> Result<Self> {
        let dir = cfg.require_path("out")?;
        std::fs::create_dir_all(&dir).map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
        Ok(Self { dir, header: metadata_header(cfg, timestamp), files: Vec::new() })
    }

    fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, format!("{}{body}", self.header))?;
        self.files.push(path);
        Ok(())
    }

    fn record(&mut self, sub: &str, names: Vec<String>) {
        let base = if sub.is_empty() { self.dir.clone() } else { self.dir.join(sub) };
        self.files.extend(names.into_iter().map(|n| base.join(n)));
    }

    fn finish(mut self, command: &str, cfg: &RunConfig, timestamp: Option<u64>) -> Result<Vec<PathBuf>> {
        let rel: Vec<String> = self
            .files
            .iter()
            .map(|f| f.strip_prefix(&self.dir).unwrap_or(f).display().to_string())
            .collect();
        let run = serde_json::json!({
            "mortcast": VERSION,
            "command": command,
            "seed": cfg.seed,
            "config_hash": cfg.hash(),
            "config": cfg.to_text(),
            "generated_unix": timestamp,
            "files": rel,
        });
        let path = self.dir.join("run.json");
        std::fs::write(&path, serde_json::to_string_pretty(&run)? + "\n")?;
        self.files.push(path);
        Ok(self.files)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))
}

fn ingest_tables(cfg: &RunConfig) -> Result<MortalityDataset> {
    let rates_path = cfg.require_path("rates")?;
    let exposures_path = cfg.require_path("exposures")?;
    let layout = ColumnLayout::default();
    let rates = parse_rates(&read(&rates_path)?, &layout).map_err(|e| e.context(rates_path.display().to_string()))?;
    let exposures =
        parse_exposures(&read(&exposures_path)?, &layout).map_err(|e| e.context(exposures_path.display().to_string()))?;
    build_dataset(&rates, &exposures, cfg.age_min, cfg.age_max)
}

/// The canonical dataset if `data` is set, otherwise ingest the raw tables.
fn load(cfg: &RunConfig) -> Result<MortalityDataset> {
    match &cfg.data {
        Some(path) => canonical::from_csv(&read(path)?).map_err(|e| e.context(path.display().to_string())),
        None if cfg.rates.is_some() || cfg.exposures.is_some() => ingest_tables(cfg),
        None => Err(Error::Config { field: "data".into(), message: "is required (or give rates and exposures)".into() }),
    }
}

fn execute(command: &Command, cfg: &RunConfig, timestamp: Option<u64>) -> Result<Vec<PathBuf>> {
    let name = command.name();
    // Read and validate inputs before touching the output directory.
    let data = match command {
        Command::Ingest(_) => Some(ingest_tables(cfg)?),
        Command::Simulate(_) => None,
        _ => Some(load(cfg)?),
    };
    let mut out = Output::new(cfg, timestamp)?;
    match command {
        Command::Ingest(_) => {
            out.csv("data.csv", &canonical::to_csv(data.as_ref().expect("loaded")))?;
        }
        Command::Smooth(_) => {
            let sm = smooth_dataset(data.as_ref().expect("loaded"), &cfg.smooth_config())?;
            out.csv("smoothed.csv", &smooth::to_csv(&sm))?;
        }
        Command::Fit(_) => {
            let sm = smooth_dataset(data.as_ref().expect("loaded"), &cfg.smooth_config())?;
            let dec = decompose(&sm, cfg.lambda, cfg.threshold)?;
            let names = dec.write_dir(&out.dir, &out.header)?;
            out.record("", names);
        }
        Command::Forecast(_) => {
            let sm = smooth_dataset(data.as_ref().expect("loaded"), &cfg.smooth_config())?;
            let settings = cfg.forecast_settings();
            let dec = decompose(&sm, settings.lambda, settings.threshold)?;
            let (scores, bundle) = forecast_decomposition(&dec, &sm, &settings)?;
            let names = bundle.write_dir(&out.dir, &out.header)?;
            out.record("", names);
            out.csv("parameters.csv", &parameters_csv(&scores, &dec.labels))?;
            let mut coherence = String::from("population,reference,component,slope,status\n");
            for j in 1..dec.labels.len() {
                for r in coherence_diagnostic(&scores.residual[j], &scores.residual[0]) {
                    let _ = writeln!(
                        coherence,
                        "{},{},{},{},{}",
                        dec.labels[j],
                        dec.labels[0],
                        r.component + 1,
                        r.slope,
                        format!("{:?}", r.status).to_lowercase()
                    );
                }
            }
            out.csv("coherence.csv", &coherence)?;
            let names = dec.write_dir(&out.dir.join("decomposition"), &out.header)?;
            out.record("decomposition", names);
        }
        Command::Evaluate(_) => {
            let report = crate::eval::compare_methods(data.as_ref().expect("loaded"), &cfg.eval_config())?;
            let names = report.write_dir(&out.dir, &out.header)?;
            out.record("", names);
        }
        Command::Simulate(_) => {
            let synth = generate(&cfg.synth_config())?;
            let names = synth.write_dir(&out.dir, &out.header)?;
            out.record("", names);
        }
    }
    out.finish(name, cfg, timestamp)
}

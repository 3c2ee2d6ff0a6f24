//! Out-of-sample evaluation: expanding windows, point errors, interval scores and
//! comparison tables across methods and tuning constants.

mod metrics;
mod report;
mod window;

pub use metrics::{error_metrics, interval_metrics, interval_score, point_metrics, IntervalMetrics, PointMetric, PointMetrics};
pub use report::{
    compare_methods, EvalConfig, EvaluationReport, IntervalStat, Measure, ReportEntry, TableRow, DEFAULT_LAMBDAS,
    MORTALITY_SCALE,
};
pub use window::{
    actuals, expanding_window, score_windows, window_train_lengths, Actuals, Forecaster, HorizonMetrics,
    OracleForecaster, PipelineForecaster, WindowForecast, WindowResult, MIN_TRAINING_YEARS,
};

//! Tolerance-based scoring of detections and heart-rate errors.

mod errors;
mod fhr_error;
mod matching;
mod report;
mod scores;

pub use errors::{error_rates, ErrorRates};
pub use fhr_error::{aggregate_fhr_stats, fhr_mse, quantile, FhrErrorStats};
pub use matching::{match_detections, MatchResult};
pub use report::{
    evaluate_record, AggregateReport, EvalReport, KindReport, RecordReport, SCHEMA_VERSION, SD_CONVENTION,
    TOLERANCE_CONVENTION,
};
pub use scores::{
    default_tolerances, mae, score_vs_tolerance, scores, summarize_curve, write_curve_csv, Scores, SvtPoint,
    SvtSummary,
};

/// Tolerance used throughout the benchmark, in seconds.
pub const DEFAULT_TOLERANCE_S: f64 = 0.03;

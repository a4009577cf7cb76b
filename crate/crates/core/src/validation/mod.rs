//! Downstream validation: linear SVR under nested cross-validation, plus
//! classification metrics.

mod cv;
mod metrics;
mod svr;

pub use cv::{nested_cv, CvConfig, CvReport, FoldSplit, NestedSplitPlan, DEFAULT_LAMBDA_GRID};
pub use metrics::{classification_metrics, correlation, mean_squared_error, standardized_mean_difference, MetricsReport};
pub use svr::{svr_fit, svr_fit_traced, SvrModel, SvrParams};

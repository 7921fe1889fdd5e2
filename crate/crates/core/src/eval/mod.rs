//! Metrics, bootstrap uncertainty and robustness probes.

pub mod bootstrap;
pub mod metrics;
mod report;
pub mod robustness;

pub use bootstrap::{bootstrap, bootstrap_indices, BootstrapEstimate};
pub use metrics::{
    average_precision, classification_metrics, correlation, mae, regression_metrics, rmse, roc_auc,
    ClassificationMetrics, RegressionMetrics,
};
pub use report::{evaluate_predictions, EvalReport, MetricEntry};
pub use robustness::{fgsm, fgsm_predictions, invariance_gap};

//! Poisson simulation designs, the train / validate / test protocol, and
//! selection-curve generation.

mod design;
mod protocol;
mod report;

pub use design::{generate, sample_poisson, split_rng, DesignId, SimData, SimDesign, Split};
pub use protocol::{
    effective_tol, roc_curve, run_protocol, run_with_estimator, select_on_validation, Estimator,
    ProtocolConfig, ReplicateMetrics, RocPoint, SimMetrics, NONZERO_THRESHOLD, ROC_MIN_RATIO,
    ROC_POINTS,
};
pub use report::{column_label, metrics_json, roc_csv, table_report, TableReport, ROW_LABELS};

//! Experiment protocols and metrics: replicated cross-validation over rows,
//! the averaging baseline, AUC/RMSE/Hamming-loss/precision@k, rank sweeps,
//! and the multilabel casting.

pub mod cv;
pub mod metrics;
pub mod multilabel;
pub mod report;
pub mod splits;

pub use cv::{run_cv_experiment, run_cv_with, CvMetric};
pub use metrics::{auc, baseline_column_scores, hamming_loss, precision_at_k, rmse, rmse_matrix};
pub use multilabel::{multilabel_rank_grid, run_multilabel, MultilabelData, MultilabelOutcome};
pub use report::{AggregateRecord, CellRecord, EvalReport};
pub use splits::{make_splits, SplitAxis, SplitPlan};

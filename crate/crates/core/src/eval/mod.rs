//! Labels, chunking, metrics and cross-validation.

mod chunks;
mod cv;
mod holdout;
mod labels;
mod metrics;
mod sweep;

pub use chunks::{make_chunks, Chunk, ChunkSet, SliceSpec, VideoRecord};
pub use cv::{
    aggregate_video, cross_validate, fold_assignment, ChunkAttention, CvConfig, CvReport, FoldResult, LevelSummary,
    ModelSpec, Prediction, Stat, Summary,
};
pub use holdout::{train_holdout, HoldoutRun};
pub use labels::{dichotomize, read_labels, write_labels, TraitLabels};
pub use metrics::{
    compute_metrics, f1_score, mean_absolute_error, pearson, threshold_labels, Confusion, Metrics, Task, CLS_THRESHOLD,
};
pub use sweep::{combined_curves_svg, report_rows, sweep_slices, write_report_csv, ReportRow, SweepResult};

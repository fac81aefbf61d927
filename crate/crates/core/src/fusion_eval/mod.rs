//! Late score fusion, train/test splits and the evaluation harness.

mod eval;
mod fusion;
mod roc;
mod splits;

pub use eval::{evaluate, evaluate_scores, EvalReport, Evaluation, NamedReport, ReportKind};
pub use fusion::{fuse, FusionMode};
pub use roc::{roc_auc, RocCurve};
pub use splits::{half_subjects, leave_views_out, make_splits, Side, SplitProtocol};

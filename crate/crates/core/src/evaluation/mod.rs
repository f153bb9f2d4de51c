//! Benchmark scoring: symmetry-aware pose errors, threshold recall with
//! median errors, per-class tables, and descriptor matching metrics.

mod benchmark;
mod errors;
mod judge;
mod matching;
mod symmetry;

pub use benchmark::{
    benchmark, median, read_ground_truth, read_predictions, ClassMap, ClassRow, EvalReport, GroundTruthManifest,
    ThresholdReport, EVAL_CLASSES, OTHER_CLASS,
};
pub use errors::{rotation_error, translation_error};
pub use judge::{
    judge_instance, InstanceRecord, Judgement, Prediction, PredictionStatus, ThresholdPair, DEFAULT_THRESHOLDS,
};
pub use matching::{
    keypoint_matching_metrics, topk_metric, write_prc_csv, Confusion, MatchingMetrics, PrcPoint, OPERATING_RECALL,
};
pub use symmetry::{SymmetryClass, SymmetryKind};

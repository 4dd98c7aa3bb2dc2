//! The full modeling pipeline: class weighting, stratified cross-validation
//! and the 16-configuration selection sweep, training loops, confusion-matrix
//! metrics, phase-wise evaluation and causal streaming prediction.

pub mod crossval;
pub mod evaluate;
pub mod metrics;
pub mod stream;
pub mod train;

pub use crossval::{
    crossval_sweep, derive_seed, stratified_kfold, sweep_grid, write_sweep_csv, SweepConfig,
    SweepInputs, SweepReport, SweepRow,
};
pub use evaluate::{
    evaluate_phases, read_phases_json, write_evaluation_csv, write_phases_json, EvalCell,
    EvaluationTable, PhaseAnnotations, PhaseSpan, BETWEEN_PHASES, WHOLE_MEETING,
};
pub use metrics::{
    confusion, metrics, pooled_metrics, verify_metrics, ConfusionMatrix, MetricCheck, MetricsRow,
    ProvidedMetrics,
};
pub use stream::{Decision, StreamEvent, StreamPredictor};
pub use train::{
    class_weights, train, train_to_convergence, ConvergenceConfig, EpochStats, TrainReport,
};

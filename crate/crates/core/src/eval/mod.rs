//! Metrics, experiment tables, outlier robustness and latency.

mod bench;
mod experiment;
mod metrics;
mod robustness;

pub use bench::{bench_latency, LatencyStats, StageMillis, MIN_BENCH_SCENES};
pub use experiment::{
    run_experiment, train_models, CellRow, DatasetSpec, ExperimentConfig, ExperimentOutcome, GammaRecord,
    JointTable, Summary, Table,
};
pub use metrics::{fmt4, report, report_with_abstentions, Averages, ClassMetrics, ClassificationReport};
pub use robustness::{outlier_robustness, RobustnessConfig, RobustnessReport};

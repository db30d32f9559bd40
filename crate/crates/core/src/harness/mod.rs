//! Evaluation reports and batch experiments.

mod compare;
mod experiment;
mod report;
mod sampling;
mod svg;

pub use compare::{
    compare, compare_variants, sweep, sweep_csv, sweep_variants, CompareOutcome, CompareRow, CompareTable, GridAxis, PsnrCell,
    SweepRow, COMPARE_VARIANTS, ROW_CLEAN, ROW_GAP, ROW_NOISY,
};
pub use experiment::{run_experiment, run_variant, ExperimentOptions, NoiseSpec, RunRecord, Variant, VariantOutcome};
pub use report::{score_views, CameraScore, EvalReport, MetricPair, Split, REPORT_CSV_HEADER};
pub use sampling::{SamplingReport, SamplingRow};
pub use svg::{line_chart, Series};

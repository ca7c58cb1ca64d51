//! Multi-seed experiment grids, the two-stage ratio sweep and their reports.

mod config;
mod report;
mod runner;

pub use config::{
    full_comparison_arms, ArmConfig, ArmSpec, DatasetSource, EvaluationConfig, ExperimentConfig, KappaModel, Proxy,
    SplitConfig, SweepConfig,
};
pub use report::{
    emit_report, emit_sweep_report, fmt_auc, fmt_kappa, fmt_p, stage_label, stars, AnnotatorReferenceSummary,
    ArmReport, BaselineRef, DataSummary, ExperimentReport, KappaModelReport, KappaSection, Provenance, ReportFormat,
    Significance, SplitSummary, StageReport, SweepProxyRow, SweepReport, KAPPA_CSV_HEADER_PREFIX, REPORT_CSV_HEADER,
};
pub use runner::{
    config_hash, load_source, pretrain_source, related_generator, run, run_ratio_sweep, run_ratio_sweep_with, run_with,
    save_generated, train_arm, CellResult, CellStage, RunOptions, SingleRun, PARTIAL_RESULTS_FILE,
};

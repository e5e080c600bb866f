//! Experiment orchestration: configuration, ensembles, suites and reports.
//! Double precision only.

mod config;
mod ensemble;
mod report;
mod suites;

pub use config::{
    arch_tail, build_chain, AlphaCase, Built, Centering, ChainConfig, ExperimentConfig, ObservableConfig, Setup,
    SkeletonConfig, TailConfig, WeakLlnConfig, DEFAULT_THETAS,
};
pub use ensemble::{
    cf_distance, empirical_cf, quantile_sorted, replicate_sums, run_arch_contrast, run_ensemble, run_skeleton_contrast,
    run_weak_lln, setup, ArchContrastReport, ArchLevel, ConvergenceReport, FullLevel, LevelReport, MeanTable,
    SampleQuantile, SkeletonContrastReport, SumPlan, TailSummary, WeakLevel, WeakLlnReport, QUANTILE_PROBS,
    STREAM_RULE, VERSION,
};
pub use report::{CsvTable, Report};
pub use suites::{
    bn_table, run_diagnostics, run_poc_suite, BnRow, DiagnoseSettings, DiagnosticsReport, GapEntry, GapReport,
    HyperRow, PocReport, PoissonSummary, Ui2Curve,
};

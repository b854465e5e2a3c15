//! Multi-seed sweeps, Table-style reports and the command-line front end.

pub mod cli;
mod report;
mod sweep;

pub use report::{
    build_report, collect_runs, evaluate_run, evaluate_runs, format_report_table, read_metrics_csv,
    read_report_csv, report_runs, score_stats, write_metrics_csv, write_report_csv, RangeMode,
    ReportFiles, ReportRow, RunEntry, SeedMetric,
};
pub use sweep::{
    check_gamma_rule, completed_run, gamma_rule_holds, model_id, published_gammas, run_sweep,
    FailedRun, Family, RunRecord, RunSpec, RunStatus, SweepConfig, TrainTemplate, DEFAULT_BETA,
    FAILED_FILE, PUBLISHED_GAMMAS, TCVAE_LATENT_DIM,
};

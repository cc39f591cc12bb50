//! Scenario configuration, runners and reports.

mod config;
mod report;
mod scenarios;

pub use config::{apply_override, GridConfig, ScenarioConfig, ScenarioKind, Thresholds};
pub use report::{Outcome, RunReport, Verdict};
pub use scenarios::{
    lp_suites, remark_scaling, run_decay_a0, run_decay_positive_a, run_euler_regression,
    run_instability_gap, run_local_convergence, run_lp_selftest, run_scenario, run_single,
    taylor_green, RemarkRow, RunOutcome, SuiteResult, BERNSTEIN_SAMPLES, FAULT_SCALE,
    LADDER_RUNGS, TAYLOR_GREEN_HORIZON,
};

//! Scenario files, initial-condition sampling, the monitored run loop,
//! metrics and output files.

mod metrics;
mod output;
mod run;
mod sampler;
mod scenario;

pub use metrics::{metrics_series, MetricsSeries};
pub use output::{
    comparison_report, emit_outputs, emit_plot_scripts, metrics_csv, summary_text, trajectory_csv,
    METRICS_FILE, SCENARIO_FILE, SUMMARY_FILE, TRAJECTORY_FILE,
};
pub use run::{
    equilibrium_residual, run_scenario, DissipationSummary, MonitorKind, MonitorViolation,
    RunResult, TrajectoryRecord,
};
pub use sampler::{sample_initial_fleet, SamplerSpec};
pub use scenario::{
    set_key, ControllerSection, InitSpec, MonitorConfig, OutputConfig, RingSection, Scenario,
    ShapingKind,
};

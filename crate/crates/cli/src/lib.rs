//! Configuration and orchestration for the `rispilot` command-line tool.

pub mod commands;
pub mod config;
pub mod selftest;

pub use commands::{cell_seed, cmd_analyze, cmd_sweep, cmd_train, load_cell, CliError, TrainedCell};
pub use config::{cell_name, ExperimentConfig, GridMode, Scale};
pub use selftest::{run_selftest, SelftestOptions, SelftestReport};

/// `rispilot selftest`: prints the report and fails naming each broken
/// property.
pub fn cmd_selftest(opts: SelftestOptions) -> Result<SelftestReport, CliError> {
    let report = run_selftest(opts);
    print!("{}", report.render());
    if report.passed() {
        Ok(report)
    } else {
        Err(CliError::Selftest(report.failed()))
    }
}

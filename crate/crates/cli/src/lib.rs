//! Scenario runner and acceptance harness for `imcf-core`.
//!
//! A scenario is a JSON file naming a metric, solver settings, a flow
//! t-grid and the experiment to run; [`run::run`] dispatches it and writes
//! CSV tables (17 significant digits, documented columns) and a JSON summary
//! carrying the crate version and the scenario hash.

pub mod run;
pub mod scenario;
pub mod verify;

pub use run::{run, RunOptions, RunOutcome, VERSION};
pub use scenario::{ExperimentKind, Loaded, Scenario};
pub use verify::{verify, Check, Suite, Summary, VerifyOptions};

/// Exit statuses of the `imcf` binary.
pub mod exit {
    /// All hard verdicts pass.
    pub const OK: i32 = 0;
    /// The run completed but a hard verdict failed.
    pub const VERDICT_FAILED: i32 = 1;
    /// Usage or scenario parse/validation error.
    pub const USAGE: i32 = 2;
    /// A computation failed; outputs are flagged incomplete.
    pub const RUNTIME: i32 = 3;
}

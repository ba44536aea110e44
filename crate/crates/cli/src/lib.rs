//! Experiment harness for the `vite` command: JSON experiment specs, parallel
//! run matrices, cross-validation of step-size grids, CSV output and SVG plots.

pub mod error;
pub mod gen;
pub mod harness;
pub mod report;
pub mod spec;
pub mod theory_cmd;

pub use error::{HarnessError, Result};
pub use harness::{cross_validate, run_experiment, tune, RunSet};
pub use report::{emit_csv, emit_plot};
pub use spec::{ExperimentSpec, Size};
pub use theory_cmd::{check_theory, TheoryFile};

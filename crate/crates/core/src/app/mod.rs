//! Configuration, experiment drivers and file output.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{IcPreset, RunConfig, OUTPUT_ROOT_VAR};
pub use experiment::{final_state, run_convergence_study, run_experiment, setup, RunSummary, Setup};
pub use output::{RateRow, RateTable};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) | Error::InvalidArgument(_) | Error::PenaltyTooSmall(_) | Error::UnsupportedQuadrature(_) => {
            EXIT_CONFIG
        }
        Error::NewtonDiverged { .. } | Error::LinearSolveFailed(_) => EXIT_SOLVER,
        Error::Invariant(_) => EXIT_INVARIANT,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_SOLVER,
    }
}

//! Stage simulators for the complex r.e. set, the `B_k` gap enumeration and
//! the hard-instances game, each with a checker that replays its trace.

use thiserror::Error;

use crate::oracle::OracleError;
use crate::trace::TraceError;

pub mod complex_set;
pub mod gap;
pub mod hard_instances;

pub use complex_set::{
    check_complex_set, complex_set_run, interval_params, ComplexSetEvent, ComplexSetFinal,
    ComplexSetParams, ComplexSetRun, IntervalParams,
};
pub use gap::{check_gap, gap_bk_run, GapParams, GapRemoval, GapState};
pub use hard_instances::{
    check_hard_instances, hard_instances_run, verify_certificate, Certificate, FnProbe,
    GameCase, GameParams, GameStep, HIGameState, MachineProbe, ProgramClass, VmProbe,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("parameter out of range: {0}")]
    Range(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

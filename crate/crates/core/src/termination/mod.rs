//! Termination analysis: control variables, loop slicing, monotonicity,
//! boundedness and the termination prover.

pub mod bounds;
pub mod control;
pub mod monotonic;
pub mod prover;
pub mod slice;

pub use bounds::{boundedness, AtomBound, BoundKind};
pub use control::{control_variables, ControlVarSet};
pub use monotonic::{
    classify_monotonic, classify_sequences, sign_region, static_monotonic, update_shape, Direction, MonoClass,
    MonotonicityTrace, SignRegion,
};
pub use prover::{
    has_termination_bug, prove_termination, replay_lasso, Answer, Certificate, LadderProver, NtEvidence, Prover,
    ProverConfig, ProverVerdict, Rung, Rungs, TerminationBug, DEFAULT_SEED, PROVER_FUEL,
};
pub use slice::slice;

use crate::lang::{Stmt, StmtId};

/// Whether `s` is statement `id` or contains it.
pub(crate) fn contains(s: &Stmt, id: StmtId) -> bool {
    s.id == id || s.blocks().iter().any(|b| b.iter().any(|c| contains(c, id)))
}

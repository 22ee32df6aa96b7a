//! Numerical kernels of the four electrical basic processes and the control
//! blocks, plus the serial reference stepper.
//!
//! Kernels read and write scalar slots through [`Slots`], so the same code
//! runs on plain per-step buffers, on the interpreter's arena and on the
//! shared arena of the parallel executor.

use std::cell::Cell;

use thiserror::Error;

mod companion;
mod control;
pub mod lu;
mod serial;
mod sparse;

pub use companion::{
    branch_current, companion_constants, companion_update, initial_branch, norton, BranchState,
    CompanionModel, G_OFF, G_ON,
};
pub use control::{block_constants, eval_control_block, step_block, ControlState};
pub use lu::{factorize, forward_backward_solve, LUFactors, Symbolic};
pub use serial::{
    channel_list, control_graph, control_loop_breaks, run_serial, SerialRun, SerialStepper,
};
pub use sparse::{
    accumulate_injections, assemble_conductance, signed_sum, terminal_pairs, GatherPlan,
    SparseConductanceMatrix, StampPlan, Terms,
};

/// Any `|value|` above this aborts a run as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("non-finite or divergent value in `{subject}` at step {step}")]
    NonFiniteState { subject: String, step: usize },
    #[error("singular matrix: pivot {pivot:e} at row {row} below tolerance {tolerance:e}")]
    SingularMatrix { row: usize, pivot: f64, tolerance: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("block `{id}` of kind {kind} expects {expected} inputs, got {found}")]
    ArityMismatch { id: String, kind: String, expected: String, found: usize },
}

/// Scalar storage addressed by flat index.
pub trait Slots {
    fn get(&self, i: usize) -> f64;
    fn set(&self, i: usize, v: f64);
}

impl Slots for [Cell<f64>] {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        self[i].get()
    }

    #[inline]
    fn set(&self, i: usize, v: f64) {
        self[i].set(v)
    }
}

/// Views a mutable buffer as [`Slots`].
pub fn cells(buf: &mut [f64]) -> &[Cell<f64>] {
    Cell::from_mut(buf).as_slice_of_cells()
}

pub(crate) fn diverged(v: f64) -> bool {
    !v.is_finite() || v.abs() > DIVERGENCE_LIMIT
}

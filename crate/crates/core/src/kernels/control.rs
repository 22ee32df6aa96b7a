//! Control-block semantics.

use crate::model::{BlockKind, ControlBlock};

use super::KernelError;

/// Numeric constants of a block in the order [`step_block`] expects.
pub fn block_constants(b: &ControlBlock) -> Vec<f64> {
    match b.kind {
        BlockKind::Gain => vec![b.num("k").unwrap_or(1.0)],
        BlockKind::Sum => match b.list("signs") {
            Some(s) => s.to_vec(),
            None => vec![1.0; b.inputs.len()],
        },
        BlockKind::FirstOrderLag => vec![b.num("t").unwrap_or(1.0), b.num("k").unwrap_or(1.0)],
        BlockKind::Limiter => vec![b.num("lower").unwrap_or(0.0), b.num("upper").unwrap_or(0.0)],
        BlockKind::PiController => vec![b.num("kp").unwrap_or(0.0), b.num("ki").unwrap_or(0.0)],
        BlockKind::Constant => vec![b.num("value").unwrap_or(0.0)],
        BlockKind::Integrator | BlockKind::Comparator | BlockKind::Delay => Vec::new(),
    }
}

/// One evaluation. `u(i)` yields input `i`, `y_prev` is the block's output
/// at the previous step and `st` its stored state (see
/// [`BlockKind::state_slots`]). A delay receives its previous-step input as
/// `u(0)`.
#[inline]
pub fn step_block(
    kind: BlockKind,
    k: &[f64],
    n_inputs: usize,
    u: impl Fn(usize) -> f64,
    y_prev: f64,
    st: &mut [f64],
    dt: f64,
) -> f64 {
    match kind {
        BlockKind::Gain => k[0] * u(0),
        BlockKind::Sum => {
            let mut acc = 0.0;
            for i in 0..n_inputs {
                acc += k[i] * u(i);
            }
            acc
        }
        BlockKind::Integrator => {
            let x = u(0);
            let y = y_prev + 0.5 * dt * (x + st[0]);
            st[0] = x;
            y
        }
        BlockKind::FirstOrderLag => {
            let x = u(0);
            let den = 2.0 * k[0] + dt;
            let y = (2.0 * k[0] - dt) / den * y_prev + k[1] * dt / den * (x + st[0]);
            st[0] = x;
            y
        }
        BlockKind::Limiter => {
            let x = u(0);
            if x < k[0] {
                k[0]
            } else if x > k[1] {
                k[1]
            } else {
                x
            }
        }
        BlockKind::PiController => {
            let x = u(0);
            st[0] += 0.5 * dt * (k[1] * x + k[1] * st[1]);
            st[1] = x;
            k[0] * x + st[0]
        }
        BlockKind::Comparator => {
            if u(0) >= u(1) {
                1.0
            } else {
                0.0
            }
        }
        BlockKind::Constant => k[0],
        BlockKind::Delay => u(0),
    }
}

/// Stored state of one block between steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlState {
    pub output: f64,
    pub slots: Vec<f64>,
}

impl ControlState {
    pub fn new(kind: BlockKind) -> Self {
        ControlState { output: 0.0, slots: vec![0.0; kind.state_slots()] }
    }
}

/// Evaluates `block` on `inputs`, returning the output and the next state.
pub fn eval_control_block(
    block: &ControlBlock,
    state: &ControlState,
    inputs: &[f64],
    dt: f64,
) -> Result<(f64, ControlState), KernelError> {
    if !block.kind.arity_ok(inputs.len()) {
        return Err(KernelError::ArityMismatch {
            id: block.id.clone(),
            kind: block.kind.to_string(),
            expected: block.kind.arity_text().to_string(),
            found: inputs.len(),
        });
    }
    let k = block_constants(block);
    let mut next = state.clone();
    next.slots.resize(block.kind.state_slots(), 0.0);
    let y = step_block(block.kind, &k, inputs.len(), |i| inputs[i], state.output, &mut next.slots, dt);
    next.output = y;
    Ok((y, next))
}

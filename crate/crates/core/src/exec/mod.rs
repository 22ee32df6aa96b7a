//! Execution backends for schedule programs.
//!
//! [`interpret`] walks the layers in order on one thread,
//! [`execute_parallel`] spreads each layer over a pool of workers with a
//! barrier between layers, and [`emit_source`] generates a standalone C
//! program from per-kind templates. All three run the same scalar kernels
//! in the same order, so their results agree bit for bit on one host.

use std::fmt::Write as _;

use thiserror::Error;

use crate::compiler::{ScheduleParseError, ScheduleProgram};
use crate::kernels::{cells, KernelError};
use crate::waveform::WaveformSet;

mod codegen;
mod parallel;
mod process;

pub use codegen::{compile_emitted, emit_source, CompiledProgram, Dialect, Toolchain};
pub use parallel::{execute_parallel, execute_parallel_instrumented, LayerSpan, ParallelTrace};

use process::{channel_row, run_process, Scratch};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("no code template for process kind `{0}`")]
    UnknownKind(String),
    #[error("unknown source dialect `{0}`")]
    UnknownDialect(String),
    #[error("toolchain unavailable: {0}")]
    ToolchainUnavailable(String),
    #[error("compilation failed:\n{diagnostics}")]
    CompilationFailed { diagnostics: String },
    #[error("emitted program failed: {0}")]
    ProgramFailed(String),
    #[error("state file: {0}")]
    State(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleParseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("workers must be at least 1")]
    NoWorkers,
}

/// Schedule bound to its state arena.
///
/// Slot `s` of lane `k` is `arena[s * width + k]`; `step` counts completed
/// integration steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionContext {
    pub schedule: ScheduleProgram,
    pub arena: Vec<f64>,
    pub step: usize,
}

impl ExecutionContext {
    pub fn new(schedule: ScheduleProgram) -> Self {
        let arena = schedule.initial_arena();
        ExecutionContext { schedule, arena, step: 0 }
    }

    /// State snapshot: a `STATE v1 extent=<n> width=<N>` header, a
    /// `STEP <s>` line, then one line per slot with its lane values.
    pub fn snapshot(&self) -> String {
        let p = &self.schedule;
        let mut o = format!("STATE v1 extent={} width={}\nSTEP {}\n", p.extent, p.width, self.step);
        for row in self.arena.chunks(p.width) {
            let mut first = true;
            for x in row {
                if !first {
                    o.push(' ');
                }
                first = false;
                let _ = write!(o, "{x:?}");
            }
            o.push('\n');
        }
        o
    }

    pub fn restore(schedule: ScheduleProgram, text: &str) -> Result<Self, ExecError> {
        let bad = |m: String| ExecError::State(m);
        let mut lines = text.lines();
        let want = format!("STATE v1 extent={} width={}", schedule.extent, schedule.width);
        if lines.next() != Some(want.as_str()) {
            return Err(bad(format!("expected header `{want}`")));
        }
        let step = lines
            .next()
            .and_then(|l| l.strip_prefix("STEP "))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("expected `STEP <n>`".into()))?;
        let mut arena = Vec::with_capacity(schedule.arena_len());
        for (i, l) in lines.enumerate() {
            for tok in l.split_whitespace() {
                arena.push(tok.parse::<f64>().map_err(|_| bad(format!("slot {i}: bad value `{tok}`")))?);
            }
        }
        if arena.len() != schedule.arena_len() {
            return Err(bad(format!("{} values, expected {}", arena.len(), schedule.arena_len())));
        }
        Ok(ExecutionContext { schedule, arena, step })
    }

    pub fn empty_waveforms(&self) -> WaveformSet {
        let names = self.schedule.channels.iter().map(|(n, _)| n.clone()).collect();
        WaveformSet::new(names, self.schedule.width)
    }

    /// Factorizations performed so far on lane `k`.
    pub fn factorizations(&self, k: usize) -> usize {
        self.arena[self.schedule.counter * self.schedule.width + k] as usize
    }
}

/// Reference interpreter: layers in order, groups in order, processes in
/// lane order, one pass per step.
pub fn interpret(ctx: &mut ExecutionContext, steps: usize) -> Result<WaveformSet, ExecError> {
    let mut waves = ctx.empty_waveforms();
    let p = &ctx.schedule;
    let mut scratch = Scratch::new(p);
    let s = cells(&mut ctx.arena);
    for _ in 0..steps {
        let step = ctx.step + 1;
        for layer in &p.layers {
            for g in layer {
                for rec in &g.procs {
                    for k in 0..p.width {
                        run_process(p, g.kind, rec, k, s, step, &mut scratch)?;
                    }
                }
            }
        }
        ctx.step = step;
        waves.push_row(step as f64 * p.dt, channel_row(p, s));
    }
    Ok(waves)
}

/// Interprets a fresh context for the schedule's full step count.
pub fn run_interpreted(schedule: &ScheduleProgram) -> Result<WaveformSet, ExecError> {
    let steps = schedule.steps;
    interpret(&mut ExecutionContext::new(schedule.clone()), steps)
}

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Barrier, Mutex};

use crate::compiler::{ProcessKind, ProcessRecord};
use crate::kernels::{KernelError, Slots};
use crate::waveform::WaveformSet;

use super::process::{channel_row, run_process, Scratch};
use super::{ExecError, ExecutionContext};

/// Fewest work items handed to a worker before the next one is used.
/// Layers at or below this size run on worker 0 alone.
const GRAIN: usize = 16;

/// Shared arena. Within a layer no slot is both written by one process and
/// touched by another (checked when the schedule is emitted), and layers
/// are separated by barriers, so relaxed accesses suffice.
struct AtomicArena(Vec<AtomicU64>);

impl Slots for AtomicArena {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }

    #[inline]
    fn set(&self, i: usize, v: f64) {
        self.0[i].store(v.to_bits(), Ordering::Relaxed)
    }
}

/// Earliest start and latest finish tick of one layer within one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpan {
    pub step: usize,
    pub layer: usize,
    pub first_start: u64,
    pub last_end: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParallelTrace {
    /// Sorted by step, then layer.
    pub spans: Vec<LayerSpan>,
    pub barriers: usize,
    pub elided: usize,
}

impl ParallelTrace {
    /// No process of a layer started before every process of the previous
    /// layer finished.
    pub fn layers_ordered(&self) -> bool {
        self.spans.windows(2).all(|w| w[0].last_end < w[1].first_start)
    }
}

type Item<'a> = (ProcessKind, &'a ProcessRecord, usize);

struct Phase<'a> {
    items: Vec<Item<'a>>,
    record: bool,
    chunk: usize,
    active: usize,
}

/// Runs `steps` steps with `workers` threads. Work items are
/// (process, lane) pairs split into contiguous static chunks; a barrier
/// separates consecutive layers unless both run on worker 0 alone.
pub fn execute_parallel(
    ctx: &mut ExecutionContext,
    workers: usize,
    steps: usize,
) -> Result<WaveformSet, ExecError> {
    run(ctx, workers, steps, false).map(|(w, _)| w)
}

/// As [`execute_parallel`], also recording a global tick at the start and
/// end of every work item.
pub fn execute_parallel_instrumented(
    ctx: &mut ExecutionContext,
    workers: usize,
    steps: usize,
) -> Result<(WaveformSet, ParallelTrace), ExecError> {
    run(ctx, workers, steps, true)
}

fn run(
    ctx: &mut ExecutionContext,
    workers: usize,
    steps: usize,
    instrument: bool,
) -> Result<(WaveformSet, ParallelTrace), ExecError> {
    if workers == 0 {
        return Err(ExecError::NoWorkers);
    }
    let p = &ctx.schedule;
    let mut phases: Vec<Phase> = p
        .layers
        .iter()
        .map(|layer| {
            let items: Vec<Item> = layer
                .iter()
                .flat_map(|g| g.procs.iter().flat_map(move |r| (0..p.width).map(move |k| (g.kind, r, k))))
                .collect();
            let chunk = items.len().div_ceil(workers).max(GRAIN);
            let active = items.len().div_ceil(chunk);
            Phase { items, record: false, chunk, active }
        })
        .collect();
    phases.push(Phase { items: Vec::new(), record: true, chunk: 1, active: 1 });
    let np = phases.len();
    let sync: Vec<bool> =
        (0..np).map(|i| !(phases[i].active <= 1 && phases[(i + 1) % np].active <= 1)).collect();

    let arena = AtomicArena(ctx.arena.iter().map(|x| AtomicU64::new(x.to_bits())).collect());
    let barrier = Barrier::new(workers);
    let abort = AtomicBool::new(false);
    let first_error: Mutex<Option<((usize, usize, usize), KernelError)>> = Mutex::new(None);
    let clock = AtomicU64::new(0);
    let start_step = ctx.step;
    let completed = AtomicU64::new(0);

    let worker = |w: usize| -> (Option<WaveformSet>, Vec<LayerSpan>, usize, usize) {
        let mut scratch = Scratch::new(p);
        let mut waves = (w == 0).then(|| ctx.empty_waveforms());
        let mut spans = Vec::new();
        let (mut waited, mut elided) = (0, 0);
        let mut failed = false;
        'steps: for si in 0..steps {
            let step = start_step + si + 1;
            for (pi, ph) in phases.iter().enumerate() {
                if !failed {
                    if ph.record {
                        if let Some(wv) = waves.as_mut() {
                            wv.push_row(step as f64 * p.dt, channel_row(p, &arena));
                            completed.store(si as u64 + 1, Ordering::Relaxed);
                        }
                    } else {
                        let lo = (w * ph.chunk).min(ph.items.len());
                        let hi = (lo + ph.chunk).min(ph.items.len());
                        let mut span = (u64::MAX, 0);
                        for idx in lo..hi {
                            let (kind, rec, k) = ph.items[idx];
                            if instrument {
                                span.0 = span.0.min(clock.fetch_add(1, Ordering::SeqCst));
                            }
                            let r = run_process(p, kind, rec, k, &arena, step, &mut scratch);
                            if instrument {
                                span.1 = span.1.max(clock.fetch_add(1, Ordering::SeqCst));
                            }
                            if let Err(e) = r {
                                failed = true;
                                let key = (step, pi, idx);
                                let mut slot = first_error.lock().unwrap();
                                if slot.as_ref().is_none_or(|(k0, _)| key < *k0) {
                                    *slot = Some((key, e));
                                }
                                abort.store(true, Ordering::Release);
                                break;
                            }
                        }
                        if instrument && lo < hi {
                            spans.push(LayerSpan { step, layer: pi, first_start: span.0, last_end: span.1 });
                        }
                    }
                }
                let last = si + 1 == steps && pi + 1 == np;
                if last {
                    break;
                }
                if sync[pi] {
                    barrier.wait();
                    waited += 1;
                    if abort.load(Ordering::Acquire) {
                        break 'steps;
                    }
                } else {
                    elided += 1;
                }
            }
        }
        (waves, spans, waited, elided)
    };

    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = (1..workers).map(|w| scope.spawn(move || worker(w))).collect();
        let mut out = vec![worker(0)];
        out.extend(handles.into_iter().map(|h| h.join().expect("worker panicked")));
        out
    });

    for (dst, src) in ctx.arena.iter_mut().zip(&arena.0) {
        *dst = f64::from_bits(src.load(Ordering::Relaxed));
    }
    ctx.step = start_step + completed.load(Ordering::Relaxed) as usize;
    if let Some((_, e)) = first_error.into_inner().unwrap() {
        return Err(e.into());
    }
    let mut trace = ParallelTrace::default();
    let mut merged: std::collections::BTreeMap<(usize, usize), (u64, u64)> = Default::default();
    let mut waves = None;
    for (i, (wv, spans, waited, elided)) in results.into_iter().enumerate() {
        if i == 0 {
            waves = wv;
            trace.barriers = waited;
            trace.elided = elided;
        }
        for s in spans {
            let e = merged.entry((s.step, s.layer)).or_insert((u64::MAX, 0));
            e.0 = e.0.min(s.first_start);
            e.1 = e.1.max(s.last_end);
        }
    }
    trace.spans = merged
        .into_iter()
        .map(|((step, layer), (a, b))| LayerSpan { step, layer, first_start: a, last_end: b })
        .collect();
    Ok((waves.expect("worker 0 records"), trace))
}

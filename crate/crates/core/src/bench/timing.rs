//! Per-step wall-clock measurement.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{gen_scale_case, gen_scenarios, linspace, BenchError};
use crate::compiler::{compile, DeviceProfile, ScheduleProgram};
use crate::exec::{execute_parallel, interpret, ExecutionContext};
use crate::model::NetworkModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Reference interpreter on a serial schedule; the speedup baseline.
    Serial,
    Parallel(usize),
    Vectorized,
}

impl Backend {
    /// `serial`, `parallel:<workers>` or `vectorized`.
    pub fn parse(s: &str) -> Result<Self, BenchError> {
        let bad = || BenchError::UnknownBackend(s.to_string());
        match s.split_once(':') {
            None if s == "serial" => Ok(Backend::Serial),
            None if s == "vectorized" => Ok(Backend::Vectorized),
            None if s == "parallel" => Ok(Backend::Parallel(8)),
            Some(("parallel", w)) => match w.parse() {
                Ok(w) if w > 0 => Ok(Backend::Parallel(w)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }

    pub fn label(self) -> String {
        match self {
            Backend::Serial => "serial".into(),
            Backend::Parallel(w) => format!("parallel:{w}"),
            Backend::Vectorized => "vectorized".into(),
        }
    }

    fn profile(self) -> DeviceProfile {
        let name = match self {
            Backend::Serial => "cpu-serial",
            Backend::Parallel(_) => "cpu-parallel",
            Backend::Vectorized => "cpu-vector",
        };
        DeviceProfile::builtin(name).expect("builtin profile")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingConfig {
    pub warmup: usize,
    pub steps: usize,
    pub repeats: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig { warmup: 100, steps: 1000, repeats: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    /// Mean seconds per step over the repeats.
    pub avg_step_s: f64,
    /// (max - min) / min across repeats.
    pub spread: f64,
}

impl Measurement {
    pub fn noisy(&self) -> bool {
        self.spread >= 0.2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub case: String,
    pub nodes: usize,
    pub controls: usize,
    pub backend: String,
    /// Workers for the parallel executor, batch width when vectorized.
    pub width: usize,
    /// Seconds per step; per scenario for vectorized rows.
    pub avg_step_s: f64,
    pub speedup: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Times `steps` steps after `warmup` untimed ones, from a fresh context
/// each repeat. Only the step loop is inside the clock.
pub fn measure(schedule: &ScheduleProgram, backend: Backend, cfg: &TimingConfig) -> Result<Measurement, BenchError> {
    let steps = cfg.steps.max(1);
    let mut samples = Vec::with_capacity(cfg.repeats.max(1));
    for _ in 0..cfg.repeats.max(1) {
        let mut ctx = ExecutionContext::new(schedule.clone());
        let run = |ctx: &mut ExecutionContext, n: usize| match backend {
            Backend::Parallel(w) => execute_parallel(ctx, w, n).map(|_| ()),
            _ => interpret(ctx, n).map(|_| ()),
        };
        run(&mut ctx, cfg.warmup)?;
        let t0 = Instant::now();
        run(&mut ctx, steps)?;
        samples.push(t0.elapsed().as_secs_f64() / steps as f64);
    }
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(0.0, f64::max);
    let avg = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(Measurement { avg_step_s: avg, spread: if min > 0.0 { (max - min) / min } else { 0.0 } })
}

fn noise_note(m: &Measurement) -> Option<String> {
    m.noisy().then(|| format!("repeats differ by {:.0}%", m.spread * 100.0))
}

/// One report per (k, backend). `Vectorized` entries are skipped here.
pub fn run_scale_benchmark(
    base: &NetworkModel,
    ks: &[usize],
    backends: &[Backend],
    cfg: &TimingConfig,
) -> Result<Vec<TimingReport>, BenchError> {
    let mut out = Vec::new();
    for &k in ks {
        let case = gen_scale_case(base, k)?;
        let serial = compile(&case, &Backend::Serial.profile(), None)?.0;
        let baseline = measure(&serial, Backend::Serial, cfg)?;
        for &b in backends.iter().filter(|b| **b != Backend::Vectorized) {
            let mut r = TimingReport {
                case: format!("ieee33x{k}"),
                nodes: case.nodes.len(),
                controls: case.control_blocks.len(),
                backend: b.label(),
                width: if let Backend::Parallel(w) = b { w } else { 1 },
                avg_step_s: 0.0,
                speedup: 0.0,
                note: None,
            };
            let schedule = match b {
                Backend::Serial => Ok(serial.clone()),
                _ => compile(&case, &b.profile(), None).map(|c| c.0),
            };
            match schedule.map_err(BenchError::from).and_then(|s| measure(&s, b, cfg)) {
                Ok(m) => {
                    r.avg_step_s = m.avg_step_s;
                    r.speedup = baseline.avg_step_s / m.avg_step_s;
                    r.note = noise_note(&m).or_else(|| noise_note(&baseline));
                }
                Err(e) => r.note = Some(format!("error: {e}")),
            }
            out.push(r);
        }
    }
    Ok(out)
}

/// For each `n`, an `n`-scenario irradiance sweep at 25 °C. Each batch is
/// checked lane by lane against independent serial runs over
/// `check_steps` steps before it is timed; a mismatch aborts.
pub fn run_scenario_benchmark(
    base: &NetworkModel,
    ns: &[usize],
    cfg: &TimingConfig,
    check_steps: usize,
) -> Result<Vec<TimingReport>, BenchError> {
    let single = compile(base, &Backend::Serial.profile(), None)?.0;
    let baseline = measure(&single, Backend::Serial, cfg)?;
    let mut out = Vec::new();
    for &n in ns {
        let batch = gen_scenarios(base, &linspace(200.0, 1000.0, n), &[25.0])?;
        let wide = compile(base, &Backend::Vectorized.profile(), Some(&batch))?.0;
        let mut ctx = ExecutionContext::new(wide.clone());
        let waves = interpret(&mut ctx, check_steps)?;
        for lane in 0..n {
            let m = batch.scenario(base, lane)?;
            let s = compile(&m, &Backend::Serial.profile(), None)?.0;
            let want = interpret(&mut ExecutionContext::new(s), check_steps)?;
            if waves.lane(lane).to_csv() != want.to_csv() {
                return Err(BenchError::Mismatch { lane });
            }
        }
        let m = measure(&wide, Backend::Vectorized, cfg)?;
        let per = m.avg_step_s / n as f64;
        out.push(TimingReport {
            case: format!("ieee33-scenarios{n}"),
            nodes: base.nodes.len(),
            controls: base.control_blocks.len(),
            backend: Backend::Vectorized.label(),
            width: n,
            avg_step_s: per,
            speedup: baseline.avg_step_s / per,
            note: noise_note(&m),
        });
    }
    Ok(out)
}

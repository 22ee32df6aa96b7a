mod common;

use std::collections::BTreeMap;

use common::*;
use emtgrid_core::compiler::*;
use emtgrid_core::exec::*;
use emtgrid_core::kernels::{run_serial, KernelError};
use emtgrid_core::model::{parse_model, NetworkModel};
use serde_json::json;

fn schedule(m: &NetworkModel, profile: &str) -> ScheduleProgram {
    compile(m, &DeviceProfile::lookup(profile).unwrap(), None).unwrap().0
}

fn interpreted(s: &ScheduleProgram) -> emtgrid_core::waveform::WaveformSet {
    run_interpreted(s).unwrap()
}

fn models() -> Vec<NetworkModel> {
    let mut docs = vec![rc_doc(1e-5, 2e-3), control_rich_doc(400)];
    docs.extend((0..3).map(|seed| random_rlc_doc(seed, 20, 150)));
    docs.iter().map(|d| parse_model(d).unwrap()).collect()
}

#[test]
fn interpreter_matches_serial_bitwise() {
    for m in models() {
        let serial = run_serial(&m, &m.task).unwrap();
        let s = schedule(&m, "cpu-serial");
        let mut ctx = ExecutionContext::new(s.clone());
        let w = interpret(&mut ctx, s.steps).unwrap();
        assert_eq!(w.to_csv(), serial.waveforms.to_csv());
        assert_eq!(ctx.factorizations(0), serial.factorizations);
    }
}

#[test]
fn control_rich_model_breaks_its_loop_and_toggles() {
    let m = parse_model(&control_rich_doc(100)).unwrap();
    let (s, report) = compile(&m, &DeviceProfile::lookup("cpu-serial").unwrap(), None).unwrap();
    assert_eq!(report.loops.len(), 1);
    let mut ctx = ExecutionContext::new(s.clone());
    interpret(&mut ctx, s.steps).unwrap();
    assert_eq!(ctx.factorizations(0), 2);
}

#[test]
fn zero_steps_give_header_only() {
    let m = parse_model(&rc_doc(1e-5, 1e-3)).unwrap();
    let mut ctx = ExecutionContext::new(schedule(&m, "cpu-serial"));
    let w = interpret(&mut ctx, 0).unwrap();
    assert_eq!(w.steps(), 0);
    assert_eq!(w.to_csv(), "time,1\n");
}

#[test]
fn parallel_matches_interpreter_for_every_worker_count() {
    for m in models() {
        let s = schedule(&m, "cpu-parallel");
        let reference = interpreted(&s).to_csv();
        for workers in [1, 2, 3, 4, 8] {
            let mut ctx = ExecutionContext::new(s.clone());
            let w = execute_parallel(&mut ctx, workers, s.steps).unwrap();
            assert_eq!(w.to_csv(), reference, "workers={workers}");
            assert_eq!(ctx.step, s.steps);
        }
    }
}

#[test]
fn wide_layers_are_split_across_workers_and_stay_ordered() {
    let m = parse_model(&random_rlc_doc(9, 120, 40)).unwrap();
    let s = schedule(&m, "cpu-parallel");
    let reference = interpreted(&s).to_csv();
    for workers in [2, 4, 8] {
        let mut ctx = ExecutionContext::new(s.clone());
        let (w, trace) = execute_parallel_instrumented(&mut ctx, workers, s.steps).unwrap();
        assert_eq!(w.to_csv(), reference);
        assert!(trace.layers_ordered());
        assert!(trace.barriers > 0);
        assert_eq!(trace.spans.len(), s.steps * s.layer_count());
    }
}

#[test]
fn parallel_rejects_zero_workers() {
    let m = parse_model(&rc_doc(1e-5, 1e-4)).unwrap();
    let mut ctx = ExecutionContext::new(schedule(&m, "cpu-parallel"));
    assert!(matches!(execute_parallel(&mut ctx, 0, 1), Err(ExecError::NoWorkers)));
}

#[test]
fn divergence_aborts_every_backend() {
    let m = parse_model(&doc(
        &["1"],
        json!([
            {"id": "r", "kind": "resistor", "params": {"r": 1.0}, "terminals": ["1", "0"]},
            {"id": "j", "kind": "current_source", "params": {"magnitude": 1.0}, "terminals": ["1", "0"]},
            {"id": "src", "kind": "controlled_current_source", "params": {"gain": 3.0}, "terminals": ["1", "0"]}
        ]),
        json!([{"id": "k", "kind": "gain", "params": {"k": 1.0}, "inputs": ["vm"]}]),
        json!([
            {"direction": "meter", "electrical_ref": "1", "signal_ref": "vm"},
            {"direction": "actuator", "electrical_ref": "src", "signal_ref": "k"}
        ]),
        json!({"dt": 1e-3, "duration": 1.0}),
    ))
    .unwrap();
    let s = schedule(&m, "cpu-parallel");
    let serial_step = match run_serial(&m, &m.task).unwrap_err() {
        KernelError::NonFiniteState { step, .. } => step,
        other => panic!("{other}"),
    };
    match run_interpreted(&s).unwrap_err() {
        ExecError::Kernel(KernelError::NonFiniteState { step, .. }) => assert_eq!(step, serial_step),
        other => panic!("{other}"),
    }
    for workers in [1, 4] {
        let mut ctx = ExecutionContext::new(s.clone());
        match execute_parallel(&mut ctx, workers, s.steps).unwrap_err() {
            ExecError::Kernel(KernelError::NonFiniteState { step, .. }) => assert_eq!(step, serial_step),
            other => panic!("{other}"),
        }
    }
}

#[test]
fn grouped_and_ungrouped_schedules_agree() {
    let m = parse_model(&control_rich_doc(200)).unwrap();
    let p = DeviceProfile::lookup("cpu-parallel").unwrap();
    let (g, _) = break_algebraic_loops(&build_cgm(&m));
    let l = layer(&g).unwrap();
    let grouped = emit_schedule(&group_layer_processes(&l, &p), &p).unwrap();
    let ungrouped = emit_schedule(&l.ungrouped(), &p).unwrap();
    assert!(ungrouped.layers.iter().flatten().all(|g| g.procs.len() == 1));
    assert_eq!(interpreted(&grouped), interpreted(&ungrouped));
}

#[test]
fn vectorized_gain_outputs_each_scenario() {
    let m = parse_model(&doc(
        &["1"],
        json!([{"id": "r", "kind": "resistor", "params": {"r": 1.0}, "terminals": ["1", "0"]}]),
        json!([
            {"id": "one", "kind": "constant", "params": {"value": 1.0}, "inputs": []},
            {"id": "k", "kind": "gain", "params": {"k": 1.0}, "inputs": ["one"]}
        ]),
        json!([]),
        json!({"dt": 1e-4, "duration": 3e-4, "channels": ["k"]}),
    ))
    .unwrap();
    let batch = ScenarioBatch {
        rows: [2.0, 3.0, 4.0, 5.0].iter().map(|&k| BTreeMap::from([("k:k".to_string(), k)])).collect(),
    };
    let (s, _) = compile(&m, &DeviceProfile::lookup("cpu-vector").unwrap(), Some(&batch)).unwrap();
    let w = interpreted(&s);
    assert_eq!(w.width, 4);
    for (lane, k) in [2.0, 3.0, 4.0, 5.0].into_iter().enumerate() {
        assert_eq!(w.channel("k", lane).unwrap(), [k, k, k]);
    }
}

#[test]
fn vectorized_columns_equal_independent_serial_runs() {
    let base = parse_model(&control_rich_doc(300)).unwrap();
    let rows: Vec<BTreeMap<String, f64>> = (0..4)
        .map(|s| {
            BTreeMap::from([
                ("load:r".to_string(), 10.0 + 5.0 * s as f64),
                ("ref:value".to_string(), 1.0 + s as f64),
                ("vs:phase".to_string(), 15.0 * s as f64),
            ])
        })
        .collect();
    let batch = ScenarioBatch { rows };
    let (s, _) = compile(&base, &DeviceProfile::lookup("cpu-vector").unwrap(), Some(&batch)).unwrap();
    assert_eq!(s.width, 4);
    let wide = interpreted(&s);
    let mut ctx = ExecutionContext::new(s.clone());
    let par = execute_parallel(&mut ctx, 4, s.steps).unwrap();
    assert_eq!(par, wide);
    for lane in 0..4 {
        let m = batch.scenario(&base, lane).unwrap();
        let serial = run_serial(&m, &m.task).unwrap().waveforms;
        assert_eq!(wide.lane(lane).to_csv(), serial.to_csv(), "lane {lane}");
    }
}

#[test]
fn snapshots_round_trip_and_resume() {
    let m = parse_model(&control_rich_doc(200)).unwrap();
    let s = schedule(&m, "cpu-serial");
    let whole = interpreted(&s);
    let mut ctx = ExecutionContext::new(s.clone());
    let first = interpret(&mut ctx, 120).unwrap();
    let text = ctx.snapshot();
    assert!(text.starts_with(&format!("STATE v1 extent={} width=1\nSTEP 120\n", s.extent)));
    let mut resumed = ExecutionContext::restore(s.clone(), &text).unwrap();
    assert_eq!(resumed, ctx);
    let second = interpret(&mut resumed, 80).unwrap();
    assert_eq!(first.time.len() + second.time.len(), whole.time.len());
    assert_eq!(&whole.time[120..], &second.time[..]);
    for c in 0..whole.columns.len() {
        assert_eq!(&whole.columns[c][..120], &first.columns[c][..]);
        assert_eq!(&whole.columns[c][120..], &second.columns[c][..]);
    }
    assert!(ExecutionContext::restore(s.clone(), "STATE v1 extent=1 width=1\nSTEP 0\n0\n").is_err());
    assert!(ExecutionContext::restore(s, &text.replace("STEP 120", "STEP x")).is_err());
}

fn call_sites(src: &str) -> usize {
    src.lines().filter(|l| l.starts_with("    k_") && l.trim_end().ends_with(");")).count()
}

#[test]
fn emitted_source_has_one_call_site_per_process() {
    let m = parse_model(&doc(
        &["1"],
        json!([{"id": "r", "kind": "resistor", "params": {"r": 2.0}, "terminals": ["1", "0"]}]),
        json!([]),
        json!([]),
        json!({"dt": 1e-4, "duration": 1e-3}),
    ))
    .unwrap();
    let s = schedule(&m, "cpu-serial");
    let src = emit_source(&s, "c99").unwrap();
    assert_eq!(call_sites(&src), 4);
    assert_eq!(src, emit_source(&s, "c99").unwrap());
    let rich = schedule(&parse_model(&control_rich_doc(10)).unwrap(), "cpu-serial");
    assert_eq!(call_sites(&emit_source(&rich, "c99").unwrap()), rich.process_count());
    assert!(matches!(emit_source(&s, "cuda"), Err(ExecError::UnknownDialect(_))));
}

fn max_rel(a: &emtgrid_core::waveform::WaveformSet, b: &emtgrid_core::waveform::WaveformSet) -> f64 {
    assert_eq!(a.columns.len(), b.columns.len());
    assert_eq!(a.time, b.time);
    let mut worst = 0.0f64;
    for (x, y) in a.columns.iter().zip(&b.columns) {
        for (&p, &q) in x.iter().zip(y) {
            let scale = p.abs().max(q.abs());
            if scale > 0.0 {
                worst = worst.max((p - q).abs() / scale);
            }
        }
    }
    worst
}

#[test]
fn compiled_program_matches_interpreter() {
    let tc = Toolchain::default();
    if !tc.available() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    for (i, m) in models().into_iter().enumerate() {
        let s = schedule(&m, "cpu-serial");
        let reference = interpreted(&s);
        let work = dir.path().join(i.to_string());
        let exe = compile_emitted(&emit_source(&s, "c99").unwrap(), &tc, &work).unwrap();
        let w = exe.run(&ExecutionContext::new(s.clone()), s.steps, &work).unwrap();
        assert_eq!(w.channels, reference.channels);
        let err = max_rel(&w, &reference);
        assert!(err <= 1e-12, "model {i}: {err}");
    }
}

#[test]
fn compiled_vectorized_program_resumes_from_state() {
    let tc = Toolchain::default();
    if !tc.available() {
        return;
    }
    let base = parse_model(&control_rich_doc(200)).unwrap();
    let batch = ScenarioBatch {
        rows: (0..3).map(|s| BTreeMap::from([("load:r".to_string(), 10.0 + s as f64)])).collect(),
    };
    let (s, _) = compile(&base, &DeviceProfile::lookup("cpu-vector").unwrap(), Some(&batch)).unwrap();
    let mut ctx = ExecutionContext::new(s.clone());
    interpret(&mut ctx, 50).unwrap();
    let reference = interpret(&mut ctx.clone(), 150).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let exe = compile_emitted(&emit_source(&s, "c99").unwrap(), &tc, dir.path()).unwrap();
    let w = exe.run(&ctx, 150, dir.path()).unwrap();
    assert_eq!(w.width, 3);
    assert!(max_rel(&w, &reference) <= 1e-12);
}

#[test]
fn corrupted_source_reports_diagnostics() {
    let tc = Toolchain::default();
    if !tc.available() {
        return;
    }
    let m = parse_model(&rc_doc(1e-5, 1e-4)).unwrap();
    let src = emit_source(&schedule(&m, "cpu-serial"), "c99").unwrap().replace("static void step_all", "static void step_all(");
    let dir = tempfile::tempdir().unwrap();
    match compile_emitted(&src, &tc, dir.path()) {
        Err(ExecError::CompilationFailed { diagnostics }) => assert!(!diagnostics.trim().is_empty()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_toolchain_is_reported() {
    let tc = Toolchain { compiler: "/nonexistent/cc".into(), flags: Vec::new() };
    assert!(!tc.available());
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(compile_emitted("int main(void){return 0;}", &tc, dir.path()), Err(ExecError::ToolchainUnavailable(_))));
}

use std::collections::BTreeMap;

use emtgrid_core::bench::*;
use emtgrid_core::compiler::*;
use emtgrid_core::exec::{interpret, ExecutionContext};
use emtgrid_core::model::{parse_model, serialize_model, validate, ComponentKind, NetworkModel};
use proptest::prelude::*;

fn feeder_nodes(m: &NetworkModel) -> usize {
    m.nodes.iter().filter(|n| !n.contains(".dc")).count()
}

fn quick() -> TimingConfig {
    TimingConfig { warmup: 5, steps: 20, repeats: 1 }
}

fn short(mut m: NetworkModel, steps: usize) -> NetworkModel {
    m.task.duration = m.task.dt * steps as f64;
    m
}

#[test]
fn bundled_case_shape() {
    let m = ieee33_pv3();
    assert_eq!(feeder_nodes(&m), 33);
    assert_eq!(m.nodes.len(), 36);
    assert_eq!(m.root.as_deref(), Some("1"));
    assert_eq!(pv_count(&m), 3);
    assert_eq!(m.control_blocks.len(), 3 * 78);
    assert!(!validate(&m).has_errors());
    assert_eq!(m.task.step_count(), 10_000);
}

#[test]
fn bundled_case_cgm_counts() {
    let m = ieee33_pv3();
    let g = build_cgm(&m);
    assert_eq!(g.vertices.len(), 2 * m.components.len() + 2 + 234);

    let mut per_kind: BTreeMap<String, usize> = BTreeMap::new();
    for c in &m.components {
        *per_kind.entry(ProcessKind::Norton(c.kind).name()).or_default() += 1;
    }
    let (g, _) = break_algebraic_loops(&g);
    let l = group_layer_processes(&layer(&g).unwrap(), &DeviceProfile::lookup("cpu-parallel").unwrap());
    let layer0: BTreeMap<String, usize> = l.layers[0]
        .iter()
        .filter(|gr| matches!(gr.kind, ProcessKind::Norton(_)))
        .map(|gr| (gr.kind.name(), gr.procs.len()))
        .collect();
    assert_eq!(layer0, per_kind);
}

#[test]
fn bundled_schedule_round_trips() {
    let m = ieee33_pv3();
    let (s, _) = compile(&m, &DeviceProfile::lookup("cpu-serial").unwrap(), None).unwrap();
    let text = s.to_text();
    let back = ScheduleProgram::parse(&text).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.to_text(), text);
}

#[test]
fn single_replica_is_base() {
    let m = ieee33_pv3();
    assert_eq!(gen_scale_case(&m, 1).unwrap(), m);
    assert!(matches!(gen_scale_case(&m, 0), Err(BenchError::InvalidReplication)));
    let mut rootless = m.clone();
    rootless.root = None;
    assert!(matches!(gen_scale_case(&rootless, 2), Err(BenchError::NoRoot)));
}

#[test]
fn three_replicas_share_root() {
    let m = gen_scale_case(&ieee33_pv3(), 3).unwrap();
    assert_eq!(feeder_nodes(&m), 97);
    assert_eq!(pv_count(&m), 9);
    let back = parse_model(&serialize_model(&m)).unwrap();
    assert_eq!(back, m);
    assert!(!validate(&back).has_errors());
}

#[test]
fn k330_counts() {
    let m = gen_scale_case(&ieee33_pv3(), 330).unwrap();
    assert_eq!(pv_count(&m), 990);
    assert_eq!(m.control_blocks.len(), 77_220);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn replication_is_affine(k in 1usize..12) {
        let base = ieee33_pv3();
        let m = gen_scale_case(&base, k).unwrap();
        prop_assert_eq!(m.nodes.len(), k * base.nodes.len() - (k - 1));
        prop_assert_eq!(m.control_blocks.len(), k * base.control_blocks.len());
        prop_assert_eq!(m.components.len(), k * base.components.len());
        let mut ids: Vec<&str> = m.components.iter().map(|c| c.id.as_str()).collect();
        ids.extend(m.control_blocks.iter().map(|b| b.id.as_str()));
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
    }
}

#[test]
fn scenario_grid_order() {
    let m = ieee33_pv3();
    let b = gen_scenarios(&m, &[500.0, 900.0], &[20.0, 40.0]).unwrap();
    assert_eq!(b.len(), 4);
    let pick = |r: usize| (b.rows[r]["pv18.array:irradiance"], b.rows[r]["pv18.array:temperature"]);
    assert_eq!((0..4).map(pick).collect::<Vec<_>>(), [(500.0, 20.0), (500.0, 40.0), (900.0, 20.0), (900.0, 40.0)]);
    for row in &b.rows {
        assert_eq!(row.len(), 6);
    }
    assert_eq!(gen_scenarios(&m, &linspace(100.0, 1000.0, 40), &linspace(0.0, 48.0, 25)).unwrap().len(), 1000);
    assert!(matches!(gen_scenarios(&m, &[], &[25.0]), Err(BenchError::EmptyGrid)));
}

#[test]
fn degenerate_batch_equals_overridden_base() {
    let base = short(ieee33_pv3(), 200);
    let b = gen_scenarios(&base, &[640.0], &[31.0]).unwrap();
    let wide = compile(&base, &DeviceProfile::lookup("cpu-vector").unwrap(), Some(&b)).unwrap().0;
    let got = interpret(&mut ExecutionContext::new(wide), 200).unwrap();

    let mut m = base.clone();
    for c in m.components.iter_mut().filter(|c| c.kind == ComponentKind::PvArray) {
        c.params.insert("irradiance".into(), emtgrid_core::model::Param::Num(640.0));
        c.params.insert("temperature".into(), emtgrid_core::model::Param::Num(31.0));
    }
    let want = emtgrid_core::kernels::run_serial(&m, &m.task).unwrap().waveforms;
    assert_eq!(got.to_csv(), want.to_csv());
}

#[test]
fn eight_irradiance_lanes_match_serial_runs() {
    let base = short(ieee33_pv3(), 150);
    let b = gen_scenarios(&base, &linspace(300.0, 1000.0, 8), &[25.0]).unwrap();
    let wide = compile(&base, &DeviceProfile::lookup("cpu-vector").unwrap(), Some(&b)).unwrap().0;
    let got = interpret(&mut ExecutionContext::new(wide), 150).unwrap();
    for lane in 0..8 {
        let m = b.scenario(&base, lane).unwrap();
        let want = emtgrid_core::kernels::run_serial(&m, &m.task).unwrap().waveforms;
        assert_eq!(got.lane(lane).to_csv(), want.to_csv(), "lane {lane}");
    }
}

#[test]
fn backend_labels() {
    assert_eq!(Backend::parse("serial").unwrap(), Backend::Serial);
    assert_eq!(Backend::parse("parallel:8").unwrap(), Backend::Parallel(8));
    assert_eq!(Backend::parse("vectorized").unwrap(), Backend::Vectorized);
    for bad in ["parallel:0", "parallel:x", "gpu", ""] {
        assert!(Backend::parse(bad).is_err(), "{bad}");
    }
    assert_eq!(Backend::Parallel(4).label(), "parallel:4");
}

fn sample(case: &str, backend: &str, avg: f64) -> TimingReport {
    TimingReport {
        case: case.into(),
        nodes: 36,
        controls: 234,
        backend: backend.into(),
        width: 1,
        avg_step_s: avg,
        speedup: 1.0,
        note: None,
    }
}

#[test]
fn csv_report_rows() {
    let one = report(&[sample("ieee33x1", "serial", 1.25e-4)], ReportFormat::Csv);
    let lines: Vec<&str> = one.lines().collect();
    assert_eq!(lines, [CSV_HEADER, "ieee33x1,36,234,serial,1,1.250000e-4,1.000"]);
}

#[test]
fn table_header_and_determinism() {
    let rs = [sample("a", "serial", 2e-4), sample("a", "parallel:8", 1e-4)];
    let t = report(&rs, ReportFormat::Table);
    assert!(t.starts_with("steps per 60 s scenario at 50 us: 1,200,000\n"));
    assert_eq!(steps_per_task(60.0, 50e-6), 1_200_000);
    let svg = report(&rs, ReportFormat::Svg);
    assert!(svg.starts_with("<svg ") && svg.ends_with("</svg>\n"));
    assert_eq!(svg.matches("<rect").count(), 2);
    assert_eq!(report(&rs, ReportFormat::Svg), svg);
    assert_eq!(ReportFormat::parse("csv"), Some(ReportFormat::Csv));
    assert_eq!(ReportFormat::parse("pdf"), None);
}

#[test]
fn cost_rows() {
    let rows = [
        CostRow { device: "Intel E5-2682".into(), price_per_week: 115.0, wall_hours: 0.53, devices: 1 },
        CostRow { device: "NVIDIA P100".into(), price_per_week: 145.0, wall_hours: 0.29, devices: 1 },
    ];
    let t = cost_table(&rows).unwrap();
    let l: Vec<&str> = t.lines().collect();
    assert!(l[1].ends_with("0.363") && l[2].ends_with("0.250"), "{t}");
}

#[test]
fn scale_benchmark_smoke() {
    let base = ieee33_pv3();
    let rs = run_scale_benchmark(&base, &[1, 2], &[Backend::Serial, Backend::Parallel(2)], &quick()).unwrap();
    assert_eq!(rs.len(), 4);
    assert_eq!(rs[2].nodes, 2 * 36 - 1);
    assert_eq!(rs[3].controls, 2 * 234);
    for r in &rs {
        assert!(r.avg_step_s > 0.0 && r.speedup > 0.0, "{r:?}");
    }
}

#[test]
fn scenario_benchmark_smoke() {
    let base = ieee33_pv3();
    let rs = run_scenario_benchmark(&base, &[1, 4], &quick(), 10).unwrap();
    assert_eq!(rs.iter().map(|r| r.width).collect::<Vec<_>>(), [1, 4]);
    assert!(rs.iter().all(|r| r.backend == "vectorized" && r.avg_step_s > 0.0));
}

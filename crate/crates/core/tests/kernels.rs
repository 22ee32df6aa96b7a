mod common;

use common::*;
use emtgrid_core::kernels::{run_serial, SerialStepper};
use emtgrid_core::model::parse_model;
use serde_json::json;

#[test]
fn rc_discharge_matches_exponential() {
    let m = parse_model(&rc_doc(1e-6, 5e-3)).unwrap();
    let run = run_serial(&m, &m.task).unwrap();
    let w = &run.waveforms;
    assert_eq!(w.steps(), 5000);
    let err = rc_max_rel_error(&w.time, w.channel("1", 0).unwrap());
    assert!(err < 1e-3, "{err}");
}

#[test]
fn trapezoidal_rule_is_second_order() {
    let err = |dt: f64| {
        let m = parse_model(&rc_doc(dt, 5e-3)).unwrap();
        let w = run_serial(&m, &m.task).unwrap().waveforms;
        let v = w.channel("1", 0).unwrap();
        w.time.iter().zip(v).map(|(&t, &x)| (x - (-t / 1e-3).exp()).abs()).fold(0.0, f64::max)
    };
    let ratio = err(1e-6) / err(0.5e-6);
    assert!((3.0..=5.0).contains(&ratio), "{ratio}");
}

#[test]
fn source_free_network_stays_at_zero() {
    let m = parse_model(&doc(
        &["1", "2"],
        json!([
            {"id": "r", "kind": "resistor", "params": {"r": 5.0}, "terminals": ["1", "2"]},
            {"id": "l", "kind": "inductor", "params": {"l": 1e-3}, "terminals": ["2", "0"]},
            {"id": "c", "kind": "capacitor", "params": {"c": 1e-6}, "terminals": ["1", "0"]}
        ]),
        json!([]),
        json!([]),
        json!({"dt": 1e-6, "duration": 1e-3}),
    ))
    .unwrap();
    let w = run_serial(&m, &m.task).unwrap().waveforms;
    assert!(w.columns.iter().flatten().all(|&x| x == 0.0));
}

fn rlc_step_doc(dt: f64, duration: f64) -> String {
    doc(
        &["1", "2"],
        json!([
            {"id": "vs", "kind": "voltage_source", "params": {"magnitude": 1.0, "r_series": 1.0}, "terminals": ["1", "0"]},
            {"id": "l", "kind": "inductor", "params": {"l": 1e-3, "v0": 1.0}, "terminals": ["1", "2"]},
            {"id": "c", "kind": "capacitor", "params": {"c": 1e-6}, "terminals": ["2", "0"]}
        ]),
        json!([]),
        json!([]),
        json!({"dt": dt, "duration": duration, "channels": ["2", "l"]}),
    )
}

#[test]
fn series_rlc_step_response() {
    let m = parse_model(&rlc_step_doc(1e-7, 2e-3)).unwrap();
    let w = run_serial(&m, &m.task).unwrap().waveforms;
    let (r, l, c) = (1.0f64, 1e-3f64, 1e-6f64);
    let alpha = r / (2.0 * l);
    let wd = (1.0 / (l * c) - alpha * alpha).sqrt();
    let vc = w.channel("2", 0).unwrap();
    let worst = w
        .time
        .iter()
        .zip(vc)
        .map(|(&t, &v)| {
            let exact = 1.0 - (-alpha * t).exp() * ((wd * t).cos() + alpha / wd * (wd * t).sin());
            (v - exact).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn sparse_solve_matches_dense_oracle_and_kcl() {
    for seed in 0..5 {
        let m = parse_model(&random_rlc_doc(seed, 20, 200)).unwrap();
        let mut st = SerialStepper::new(&m, &m.task);
        for _ in 0..200 {
            st.step().unwrap();
            let a = st.matrix_plan().matrix(|_| 0.0);
            let mut a = a;
            a.values.copy_from_slice(&st.matrix);
            let dense = a.to_dense();
            let x = dense_solve(&dense, &st.rhs);
            let scale = inf_norm(&x).max(1e-300);
            let diff: Vec<f64> = x.iter().zip(&st.v).map(|(p, q)| p - q).collect();
            assert!(inf_norm(&diff) / scale <= 1e-9);
            let resid: Vec<f64> = a.mul(&st.v).iter().zip(&st.rhs).map(|(p, q)| p - q).collect();
            assert!(inf_norm(&resid) <= 1e-9 * inf_norm(&st.rhs));
        }
    }
}

#[test]
fn stamping_matches_direct_dense_oracle() {
    let m = parse_model(&random_rlc_doc(7, 12, 1)).unwrap();
    let mut st = SerialStepper::new(&m, &m.task);
    st.step().unwrap();
    let idx = m.node_index();
    let n = m.nodes.len();
    let mut dense = vec![vec![0.0; n]; n];
    let dt = m.task.dt;
    for c in &m.components {
        let g = match c.kind.as_str() {
            "resistor" => 1.0 / c.num("r").unwrap(),
            "inductor" => dt / (2.0 * c.num("l").unwrap()),
            "capacitor" => 2.0 * c.num("c").unwrap() / dt,
            _ => 0.0,
        };
        let a = idx.get(c.terminals[0].as_str()).copied();
        let b = idx.get(c.terminals[1].as_str()).copied();
        if let Some(a) = a {
            dense[a][a] += g;
        }
        if let Some(b) = b {
            dense[b][b] += g;
        }
        if let (Some(a), Some(b)) = (a, b) {
            dense[a][b] -= g;
            dense[b][a] -= g;
        }
    }
    let mut got = st.matrix_plan().matrix(|_| 0.0);
    got.values.copy_from_slice(&st.matrix);
    let got = got.to_dense();
    for i in 0..n {
        for j in 0..n {
            assert!((got[i][j] - dense[i][j]).abs() <= 1e-12 * dense[i][i].abs());
            assert_eq!(got[i][j], got[j][i]);
        }
    }
}

#[test]
fn passive_energy_never_increases() {
    let m = parse_model(&doc(
        &["1", "2"],
        json!([
            {"id": "c", "kind": "capacitor", "params": {"c": 1e-6, "v0": 1.0}, "terminals": ["1", "0"]},
            {"id": "r", "kind": "resistor", "params": {"r": 2.0}, "terminals": ["1", "2"]},
            {"id": "l", "kind": "inductor", "params": {"l": 1e-3}, "terminals": ["2", "0"]}
        ]),
        json!([]),
        json!([]),
        json!({"dt": 1e-6, "duration": 5e-3}),
    ))
    .unwrap();
    let mut st = SerialStepper::new(&m, &m.task);
    let energy = |st: &SerialStepper| 0.5 * 1e-6 * st.bv[0] * st.bv[0] + 0.5 * 1e-3 * st.bi[2] * st.bi[2];
    let mut prev = energy(&st);
    for _ in 0..5000 {
        st.step().unwrap();
        let e = energy(&st);
        assert!(e <= prev * (1.0 + 1e-12), "{e} > {prev}");
        prev = e;
    }
    assert!(prev < 0.5e-6);
}

#[test]
fn refactorization_only_on_switching() {
    let m = parse_model(&doc(
        &["1"],
        json!([
            {"id": "vs", "kind": "voltage_source", "params": {"magnitude": 10.0, "frequency": 50.0, "r_series": 1.0}, "terminals": ["1", "0"]},
            {"id": "s1", "kind": "switch", "params": {"closed": 0, "t_toggle": 2e-3}, "terminals": ["1", "0"]},
            {"id": "s2", "kind": "switch", "params": {"closed": 1, "t_toggle": 5e-3}, "terminals": ["1", "0"]},
            {"id": "r", "kind": "resistor", "params": {"r": 4.0}, "terminals": ["1", "0"]}
        ]),
        json!([]),
        json!([]),
        json!({"dt": 1e-4, "duration": 1e-2}),
    ))
    .unwrap();
    assert_eq!(run_serial(&m, &m.task).unwrap().factorizations, 3);
}

#[test]
fn serial_runs_are_bitwise_repeatable() {
    let m = parse_model(&random_rlc_doc(3, 20, 300)).unwrap();
    let a = run_serial(&m, &m.task).unwrap().waveforms.to_csv();
    let b = run_serial(&m, &m.task).unwrap().waveforms.to_csv();
    assert_eq!(a, b);
}

#[test]
fn divergence_is_reported() {
    // positive feedback through a controlled source blows up
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
    let err = run_serial(&m, &m.task).unwrap_err();
    assert!(matches!(err, emtgrid_core::kernels::KernelError::NonFiniteState { .. }), "{err}");
}

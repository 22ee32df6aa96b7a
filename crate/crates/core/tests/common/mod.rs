//! Test-only oracles and model builders.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &x)| {
        let mut row = r.clone();
        row.push(x);
        row
    }).collect();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, p);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = m[r][n];
        for c in r + 1..n {
            acc -= m[r][c] * x[c];
        }
        x[r] = acc / m[r][r];
    }
    x
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn doc(nodes: &[&str], components: Value, control: Value, couplings: Value, task: Value) -> String {
    json!({
        "nodes": nodes,
        "components": components,
        "control": control,
        "couplings": couplings,
        "task": task,
    })
    .to_string()
}

/// RC discharge: R = 1 kΩ, C = 1 µF, v(0) = 1 V with a consistent initial
/// capacitor current.
pub fn rc_doc(dt: f64, duration: f64) -> String {
    doc(
        &["1"],
        json!([
            {"id": "r", "kind": "resistor", "params": {"r": 1000.0}, "terminals": ["1", "0"]},
            {"id": "c", "kind": "capacitor", "params": {"c": 1e-6, "v0": 1.0, "i0": -1e-3}, "terminals": ["1", "0"]}
        ]),
        json!([]),
        json!([]),
        json!({"dt": dt, "duration": duration, "channels": ["1"]}),
    )
}

/// Max relative error of the RC waveform against `exp(-t/RC)`.
pub fn rc_max_rel_error(times: &[f64], v: &[f64]) -> f64 {
    times
        .iter()
        .zip(v)
        .map(|(&t, &x)| {
            let exact = (-t / 1e-3).exp();
            ((x - exact) / exact).abs()
        })
        .fold(0.0, f64::max)
}

fn kind_params(rng: &mut ChaCha8Rng) -> (&'static str, Value) {
    match rng.gen_range(0..3) {
        0 => ("resistor", json!({"r": rng.gen_range(0.5..50.0)})),
        1 => ("inductor", json!({"l": rng.gen_range(1e-4..1e-2)})),
        _ => ("capacitor", json!({"c": rng.gen_range(1e-7..1e-5)})),
    }
}

/// Random connected RLC network on `n` nodes, every node tied to ground
/// through a resistor, driven by sinusoidal current sources.
pub fn random_rlc_doc(seed: u64, n: usize, steps: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let mut comps = Vec::new();
    let add = |comps: &mut Vec<Value>, id: String, kind: &str, params: Value, a: String, b: String| {
        comps.push(json!({"id": id, "kind": kind, "params": params, "terminals": [a, b]}));
    };
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        let (k, p) = kind_params(&mut rng);
        add(&mut comps, format!("t{i}"), k, p, nodes[parent].clone(), nodes[i].clone());
    }
    for e in 0..n / 2 {
        let a = rng.gen_range(0..n);
        let b = (a + rng.gen_range(1..n)) % n;
        let (k, p) = kind_params(&mut rng);
        add(&mut comps, format!("x{e}"), k, p, nodes[a].clone(), nodes[b].clone());
    }
    for (i, node) in nodes.iter().enumerate() {
        add(&mut comps, format!("g{i}"), "resistor", json!({"r": rng.gen_range(10.0..1000.0)}), node.clone(), "0".into());
    }
    for s in 0..3 {
        let at = rng.gen_range(0..n);
        add(
            &mut comps,
            format!("j{s}"),
            "current_source",
            json!({"magnitude": rng.gen_range(0.1..10.0), "frequency": 50.0 * (s + 1) as f64, "phase": rng.gen_range(0.0..360.0)}),
            nodes[at].clone(),
            "0".into(),
        );
    }
    let node_refs: Vec<&str> = nodes.iter().map(|s| s.as_str()).collect();
    doc(&node_refs, Value::Array(comps), json!([]), json!([]), json!({"dt": 1e-5, "duration": steps as f64 * 1e-5}))
}

/// Small network exercising every block kind, an actuated source, a switch
/// and an algebraic loop that needs an inserted delay.
pub fn control_rich_doc(steps: usize) -> String {
    doc(
        &["1", "2", "3"],
        json!([
            {"id": "vs", "kind": "voltage_source", "params": {"magnitude": 10.0, "frequency": 50.0, "phase": 30.0, "r_series": 0.5}, "terminals": ["1", "0"]},
            {"id": "line", "kind": "series_rl", "params": {"r": 0.2, "l": 2e-3}, "terminals": ["1", "2"]},
            {"id": "load", "kind": "resistor", "params": {"r": 20.0}, "terminals": ["2", "0"]},
            {"id": "cap", "kind": "capacitor", "params": {"c": 1e-5}, "terminals": ["2", "3"]},
            {"id": "lr", "kind": "inductor", "params": {"l": 5e-3}, "terminals": ["3", "0"]},
            {"id": "sw", "kind": "switch", "params": {"closed": 1.0, "t_toggle": 2.5e-3}, "terminals": ["3", "0"]},
            {"id": "ccs", "kind": "controlled_current_source", "params": {"gain": 0.5}, "terminals": ["0", "2"]}
        ]),
        json!([
            {"id": "ref", "kind": "constant", "params": {"value": 3.0}, "inputs": []},
            {"id": "err", "kind": "sum", "params": {"signs": [1.0, -1.0]}, "inputs": ["ref", "filt"]},
            {"id": "filt", "kind": "first_order_lag", "params": {"t": 1e-3, "k": 1.0}, "inputs": ["v2"]},
            {"id": "pi", "kind": "pi_controller", "params": {"kp": 0.2, "ki": 30.0}, "inputs": ["err"]},
            {"id": "lim", "kind": "limiter", "params": {"lower": -2.0, "upper": 2.0}, "inputs": ["pi"]},
            {"id": "fb", "kind": "gain", "params": {"k": 0.1}, "inputs": ["loop"]},
            {"id": "loop", "kind": "sum", "params": {}, "inputs": ["lim", "fb"]},
            {"id": "cmp", "kind": "comparator", "params": {}, "inputs": ["v2", "ref"]},
            {"id": "tmr", "kind": "integrator", "params": {}, "inputs": ["cmp"]},
            {"id": "dly", "kind": "delay", "params": {}, "inputs": ["iline"]}
        ]),
        json!([
            {"direction": "meter", "electrical_ref": "2", "signal_ref": "v2"},
            {"direction": "meter", "electrical_ref": "line", "signal_ref": "iline"},
            {"direction": "actuator", "electrical_ref": "ccs", "signal_ref": "loop"}
        ]),
        json!({"dt": 5e-5, "duration": steps as f64 * 5e-5, "channels": ["1", "2", "3", "line", "loop", "tmr", "dly", "filt"]}),
    )
}

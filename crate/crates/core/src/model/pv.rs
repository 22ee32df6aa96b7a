//! Expansion of the `pv_subsystem` macro component.
//!
//! A PV subsystem attached to feeder node `X` becomes:
//!
//! * internal DC-link node `<id>.dc`,
//! * `<id>.array`: irradiance/temperature dependent current source into the
//!   DC link, shunted by `<id>.rsh` and buffered by capacitor `<id>.cdc`,
//! * `<id>.draw`: controlled source drawing the DC-link regulation current,
//! * `<id>.inv`: controlled source injecting the inverter current into `X`,
//! * a control chain of exactly [`PV_CONTROL_BLOCKS`] blocks: a DC-voltage
//!   PI loop with back-calculation anti-windup, an AC current command path,
//!   and thirteen monitoring/protection channels.

use super::{
    BlockKind, ComponentInstance, ComponentKind, ControlBlock, Coupling, CouplingDirection, Param,
    Params, GROUND,
};

pub const PV_CONTROL_BLOCKS: usize = 78;

const MONITORS: usize = 13;

pub struct PvExpansion {
    pub nodes: Vec<String>,
    pub components: Vec<ComponentInstance>,
    pub blocks: Vec<ControlBlock>,
    pub couplings: Vec<Coupling>,
}

fn params(entries: &[(&str, f64)]) -> Params {
    entries.iter().map(|(k, v)| (k.to_string(), Param::Num(*v))).collect()
}

fn signs(values: &[f64]) -> Params {
    [("signs".to_string(), Param::List(values.to_vec()))].into_iter().collect()
}

pub fn expand_pv_subsystem(pv: &ComponentInstance) -> PvExpansion {
    let id = &pv.id;
    let ac = pv.terminals[0].clone();
    let dc = format!("{id}.dc");
    let name = |s: &str| format!("{id}.{s}");
    let isc = pv.num_or("isc", 10.0);
    let vdc_ref = pv.num_or("vdc_ref", 800.0);

    let comp = |suffix: &str, kind, p: Params, a: &str, b: &str| ComponentInstance {
        id: name(suffix),
        kind,
        params: p,
        terminals: vec![a.to_string(), b.to_string()],
    };
    let components = vec![
        comp(
            "array",
            ComponentKind::PvArray,
            params(&[
                ("irradiance", pv.num_or("irradiance", 1000.0)),
                ("temperature", pv.num_or("temperature", 25.0)),
                ("isc", isc),
                ("alpha", 0.0005),
            ]),
            &dc,
            GROUND,
        ),
        comp("rsh", ComponentKind::Resistor, params(&[("r", 1.0e4)]), &dc, GROUND),
        comp("cdc", ComponentKind::Capacitor, params(&[("c", 5.0e-3)]), &dc, GROUND),
        comp("draw", ComponentKind::ControlledCurrentSource, params(&[("gain", 1.0)]), GROUND, &dc),
        comp("inv", ComponentKind::ControlledCurrentSource, params(&[("gain", 1.0)]), &ac, GROUND),
    ];

    let meter = |signal: &str, electrical: String| Coupling {
        direction: CouplingDirection::Meter,
        electrical_ref: electrical,
        signal_ref: name(signal),
    };
    let mut couplings = vec![
        meter("vdc_m", dc.clone()),
        meter("vac_m", ac.clone()),
        meter("iinv_m", name("inv")),
        meter("ipv_m", name("array")),
    ];

    let block = |suffix: &str, kind, p: Params, inputs: &[&str]| ControlBlock {
        id: name(suffix),
        kind,
        params: p,
        inputs: inputs.iter().map(|s| name(s)).collect(),
    };
    let mut blocks = vec![
        block("vdc_f1", BlockKind::FirstOrderLag, params(&[("t", 2e-3)]), &["vdc_m"]),
        block("vdc_f2", BlockKind::FirstOrderLag, params(&[("t", 2e-3)]), &["vdc_f1"]),
        block("vdc_ref", BlockKind::Constant, params(&[("value", vdc_ref)]), &[]),
        block("vdc_err", BlockKind::Sum, signs(&[1.0, -1.0]), &["vdc_f2", "vdc_ref"]),
        block("vdc_aw", BlockKind::Sum, signs(&[1.0, 1.0]), &["vdc_err", "aw_fb"]),
        block("vdc_pi", BlockKind::PiController, params(&[("kp", 0.05), ("ki", 1.0)]), &["vdc_aw"]),
        block(
            "vdc_lim",
            BlockKind::Limiter,
            params(&[("lower", 0.0), ("upper", 2.0 * isc)]),
            &["vdc_pi"],
        ),
        block("aw_diff", BlockKind::Sum, signs(&[1.0, -1.0]), &["vdc_lim", "vdc_pi"]),
        block("aw_fb", BlockKind::Gain, params(&[("k", 0.5)]), &["aw_diff"]),
        block("idc_cmd", BlockKind::FirstOrderLag, params(&[("t", 1e-3)]), &["vdc_lim"]),
        block("vac_f", BlockKind::FirstOrderLag, params(&[("t", 5e-4)]), &["vac_m"]),
        block("iac_gain", BlockKind::Gain, params(&[("k", 1e-3)]), &["vac_f"]),
        block(
            "iac_lim",
            BlockKind::Limiter,
            params(&[("lower", -50.0), ("upper", 50.0)]),
            &["iac_gain"],
        ),
    ];
    let sources = ["vac_m", "vdc_m", "iinv_m", "ipv_m"];
    let thresholds = [11_000.0, 850.0, 40.0, 15.0];
    for m in 0..MONITORS {
        let src = m % sources.len();
        let f = format!("mon{m}.f");
        let thr = format!("mon{m}.thr");
        let cmp = format!("mon{m}.cmp");
        let dly = format!("mon{m}.dly");
        let tmr = format!("mon{m}.tmr");
        blocks.push(block(
            &f,
            BlockKind::FirstOrderLag,
            params(&[("t", (m + 1) as f64 * 1e-3)]),
            &[sources[src]],
        ));
        blocks.push(block(&thr, BlockKind::Constant, params(&[("value", thresholds[src])]), &[]));
        blocks.push(block(&cmp, BlockKind::Comparator, Params::new(), &[f.as_str(), thr.as_str()]));
        blocks.push(block(&dly, BlockKind::Delay, Params::new(), &[cmp.as_str()]));
        blocks.push(block(&tmr, BlockKind::Integrator, Params::new(), &[dly.as_str()]));
    }
    debug_assert_eq!(blocks.len(), PV_CONTROL_BLOCKS);

    couplings.push(Coupling {
        direction: CouplingDirection::Actuator,
        electrical_ref: name("draw"),
        signal_ref: name("idc_cmd"),
    });
    couplings.push(Coupling {
        direction: CouplingDirection::Actuator,
        electrical_ref: name("inv"),
        signal_ref: name("iac_lim"),
    });

    PvExpansion { nodes: vec![dc], components, blocks, couplings }
}

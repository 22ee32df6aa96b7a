//! Trapezoidal companion models.
//!
//! Every branch is reduced to a Norton equivalent: conductance `g` in
//! parallel with a history current `h` and a source current `s`. The branch
//! current, measured from the first terminal to the second through the
//! element, is `i = g*v + h - s`, so the element injects `s - h` into its
//! first terminal and the opposite into its second.

use crate::model::{ComponentInstance, ComponentKind};

use super::KernelError;

/// Closed-switch conductance.
pub const G_ON: f64 = 1e4;
/// Open-switch conductance.
pub const G_OFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompanionModel {
    pub conductance: f64,
    pub history_current: f64,
    pub source_current: f64,
}

impl CompanionModel {
    /// Current injected into the first terminal.
    pub fn injection(&self) -> f64 {
        self.source_current - self.history_current
    }
}

/// The part of the electrical state a companion update reads.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BranchState {
    /// Branch voltage (first terminal minus second) at the previous step.
    pub v_prev: f64,
    /// Branch current at the previous step.
    pub i_prev: f64,
    /// Previous-step output of the actuator block (controlled sources).
    pub drive: f64,
}

/// Numeric constants of a component in the fixed order [`norton`] expects.
pub fn companion_constants(c: &ComponentInstance) -> Vec<f64> {
    use std::f64::consts::TAU;
    match c.kind {
        ComponentKind::Resistor => vec![c.num_or("r", 1.0)],
        ComponentKind::Inductor => vec![c.num_or("l", 1.0)],
        ComponentKind::Capacitor => vec![c.num_or("c", 1.0)],
        ComponentKind::SeriesRl => vec![c.num_or("r", 1.0), c.num_or("l", 1.0)],
        ComponentKind::VoltageSource => vec![
            c.num_or("magnitude", 0.0),
            TAU * c.num_or("frequency", 0.0),
            c.num_or("phase", 0.0).to_radians(),
            c.num_or("r_series", 1e-3),
        ],
        ComponentKind::CurrentSource => vec![
            c.num_or("magnitude", 0.0),
            TAU * c.num_or("frequency", 0.0),
            c.num_or("phase", 0.0).to_radians(),
        ],
        ComponentKind::Switch => vec![c.num_or("closed", 0.0), c.num_or("t_toggle", f64::INFINITY)],
        ComponentKind::ControlledCurrentSource => vec![c.num_or("gain", 1.0)],
        ComponentKind::PvArray => vec![
            c.num_or("irradiance", 1000.0),
            c.num_or("temperature", 25.0),
            c.num_or("isc", 10.0),
            c.num_or("alpha", 0.0005),
        ],
        ComponentKind::PvSubsystem => Vec::new(),
    }
}

/// Initial branch voltage and current supplied by the document.
pub fn initial_branch(c: &ComponentInstance) -> (f64, f64) {
    (c.num_or("v0", 0.0), c.num_or("i0", 0.0))
}

/// Norton update at time `t`. Returns `(g, h, s)`.
#[inline]
pub fn norton(kind: ComponentKind, k: &[f64], st: BranchState, t: f64, dt: f64) -> (f64, f64, f64) {
    match kind {
        ComponentKind::Resistor => (1.0 / k[0], 0.0, 0.0),
        ComponentKind::Inductor => {
            let g = dt / (2.0 * k[0]);
            (g, st.i_prev + g * st.v_prev, 0.0)
        }
        ComponentKind::Capacitor => {
            let g = 2.0 * k[0] / dt;
            (g, -st.i_prev - g * st.v_prev, 0.0)
        }
        ComponentKind::SeriesRl => {
            let x = 2.0 * k[1] / dt;
            let g = 1.0 / (k[0] + x);
            (g, g * (st.v_prev + (x - k[0]) * st.i_prev), 0.0)
        }
        ComponentKind::VoltageSource => {
            let g = 1.0 / k[3];
            (g, 0.0, k[0] * (k[1] * t + k[2]).cos() * g)
        }
        ComponentKind::CurrentSource => (0.0, 0.0, k[0] * (k[1] * t + k[2]).cos()),
        ComponentKind::Switch => {
            let closed = (k[0] != 0.0) ^ (t >= k[1]);
            (if closed { G_ON } else { G_OFF }, 0.0, 0.0)
        }
        ComponentKind::ControlledCurrentSource => (0.0, 0.0, k[0] * st.drive),
        ComponentKind::PvArray => {
            (0.0, 0.0, k[2] * (k[0] / 1000.0) * (1.0 + k[3] * (k[1] - 25.0)))
        }
        ComponentKind::PvSubsystem => (0.0, 0.0, 0.0),
    }
}

#[inline]
pub fn branch_current(g: f64, h: f64, s: f64, v: f64) -> f64 {
    g * v + h - s
}

/// Companion model of `component` for the step ending at `t`, given its
/// previous-step branch state.
pub fn companion_update(
    component: &ComponentInstance,
    prior: BranchState,
    t: f64,
    dt: f64,
) -> Result<CompanionModel, KernelError> {
    if !(prior.v_prev.is_finite() && prior.i_prev.is_finite() && prior.drive.is_finite()) {
        return Err(KernelError::NonFiniteState { subject: component.id.clone(), step: 0 });
    }
    let k = companion_constants(component);
    let (g, h, s) = norton(component.kind, &k, prior, t, dt);
    Ok(CompanionModel { conductance: g, history_current: h, source_current: s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Param, Params};

    fn comp(kind: ComponentKind, p: &[(&str, f64)]) -> ComponentInstance {
        let params: Params = p.iter().map(|(k, v)| (k.to_string(), Param::Num(*v))).collect();
        ComponentInstance {
            id: "x".into(),
            kind,
            params,
            terminals: vec!["1".into(), "0".into()],
        }
    }

    fn prior(v: f64, i: f64) -> BranchState {
        BranchState { v_prev: v, i_prev: i, drive: 0.0 }
    }

    #[test]
    fn inductor_substitution() {
        let m = companion_update(&comp(ComponentKind::Inductor, &[("l", 0.05)]), prior(2.0, 3.0), 0.1, 0.1)
            .unwrap();
        assert_eq!((m.conductance, m.history_current), (1.0, 5.0));
    }

    #[test]
    fn capacitor_zero_state() {
        let m = companion_update(&comp(ComponentKind::Capacitor, &[("c", 1e-6)]), prior(0.0, 0.0), 0.0, 2e-6)
            .unwrap();
        assert_eq!((m.conductance, m.history_current), (1.0, 0.0));
    }

    #[test]
    fn resistor_is_stateless() {
        let r = comp(ComponentKind::Resistor, &[("r", 2.0)]);
        for st in [prior(0.0, 0.0), prior(7.0, -3.0)] {
            let m = companion_update(&r, st, 1.0, 1e-3).unwrap();
            assert_eq!((m.conductance, m.history_current), (0.5, 0.0));
        }
    }

    #[test]
    fn switch_toggles_at_instant() {
        let s = comp(ComponentKind::Switch, &[("closed", 0.0), ("t_toggle", 1e-3)]);
        let g = |t| companion_update(&s, prior(0.0, 0.0), t, 1e-4).unwrap().conductance;
        assert_eq!(g(0.5e-3), G_OFF);
        assert_eq!(g(1e-3), G_ON);
    }

    #[test]
    fn non_finite_prior_is_rejected() {
        let l = comp(ComponentKind::Inductor, &[("l", 1.0)]);
        assert!(matches!(
            companion_update(&l, prior(f64::NAN, 0.0), 0.0, 1e-3),
            Err(KernelError::NonFiniteState { .. })
        ));
    }

    #[test]
    fn source_phase_in_degrees() {
        let v = comp(
            ComponentKind::VoltageSource,
            &[("magnitude", 2.0), ("phase", 90.0), ("r_series", 0.5)],
        );
        let m = companion_update(&v, prior(0.0, 0.0), 0.0, 1e-3).unwrap();
        assert_eq!(m.conductance, 2.0);
        assert!(m.source_current.abs() < 1e-12);
    }
}

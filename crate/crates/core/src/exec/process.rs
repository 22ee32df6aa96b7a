use crate::compiler::{ProcessKind, ProcessRecord, ScheduleProgram};
use crate::kernels::{
    branch_current, diverged, norton, signed_sum, step_block, BranchState, KernelError, Slots,
};
use crate::model::BlockKind;

/// Per-thread buffers for factorization and substitution.
pub(crate) struct Scratch {
    pos: Vec<usize>,
    y: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(p: &ScheduleProgram) -> Self {
        Scratch { pos: vec![0; p.nodes], y: vec![0.0; p.nodes] }
    }
}

/// Runs one process on lane `k` for step `step` (1-based).
#[inline]
pub(crate) fn run_process<S: Slots + ?Sized>(
    p: &ScheduleProgram,
    kind: ProcessKind,
    rec: &ProcessRecord,
    k: usize,
    s: &S,
    step: usize,
    sc: &mut Scratch,
) -> Result<(), KernelError> {
    let w = p.width;
    let at = |slot: usize| slot * w + k;
    let sl = &rec.slots;
    let lane_consts = || {
        let nk = rec.consts.len() / w;
        &rec.consts[k * nk..(k + 1) * nk]
    };
    match kind {
        ProcessKind::Norton(ck) => {
            let st = BranchState {
                v_prev: s.get(at(sl[3])),
                i_prev: s.get(at(sl[4])),
                drive: sl.get(5).map_or(0.0, |&d| s.get(at(d))),
            };
            let (g, h, src) = norton(ck, lane_consts(), st, step as f64 * p.dt, p.dt);
            s.set(at(sl[0]), g);
            s.set(at(sl[1]), h);
            s.set(at(sl[2]), src);
        }
        ProcessKind::Injection => s.set(at(sl[2]), s.get(at(sl[1])) - s.get(at(sl[0]))),
        ProcessKind::Factorize => {
            let mut changed = s.get(at(p.counter)) == 0.0;
            for (e, terms) in p.stamp.iter().enumerate() {
                let val = signed_sum(terms, |x| s.get(at(x)));
                if val.to_bits() != s.get(at(p.a_base + e)).to_bits() {
                    changed = true;
                }
                s.set(at(p.a_base + e), val);
            }
            if changed {
                p.symbolic.factor_slots(s, |e| at(p.a_base + e), |q| at(p.lu_base + q), &mut sc.pos)?;
                s.set(at(p.counter), s.get(at(p.counter)) + 1.0);
            }
        }
        ProcessKind::Solve => {
            p.symbolic.solve_slots(
                s,
                |q| at(p.lu_base + q),
                |r| signed_sum(&p.rhs[r], |x| s.get(at(x))),
                &mut sc.y,
                |r, x| s.set(at(r), x),
            );
            for r in 0..p.nodes {
                if diverged(s.get(at(r))) {
                    return Err(KernelError::NonFiniteState { subject: format!("node {r}"), step });
                }
            }
            for (ci, c) in p.comps.iter().enumerate() {
                let va = c.a.map_or(0.0, |a| s.get(at(a)));
                let vb = c.b.map_or(0.0, |b| s.get(at(b)));
                let bv = va - vb;
                s.set(at(c.v), bv);
                let bi = branch_current(s.get(at(c.g)), s.get(at(c.h)), s.get(at(c.s)), bv);
                s.set(at(c.i), bi);
                if diverged(bi) {
                    return Err(KernelError::NonFiniteState { subject: format!("component {ci}"), step });
                }
            }
        }
        ProcessKind::Control(BlockKind::Delay) => s.set(at(sl[0]), s.get(at(sl[1]))),
        ProcessKind::Control(bk) => {
            let ns = bk.state_slots();
            let mut st = [0.0; 2];
            for (i, x) in st.iter_mut().enumerate().take(ns) {
                *x = s.get(at(sl[1 + i]));
            }
            let ins = &sl[1 + ns..];
            let y = step_block(bk, lane_consts(), ins.len(), |i| s.get(at(ins[i])), s.get(at(sl[0])), &mut st, p.dt);
            if diverged(y) {
                return Err(KernelError::NonFiniteState { subject: format!("block {}", rec.name), step });
            }
            for (i, &x) in st.iter().enumerate().take(ns) {
                s.set(at(sl[1 + i]), x);
            }
            s.set(at(sl[0]), y);
        }
    }
    Ok(())
}

/// Channel values of the current state, laid out like
/// [`crate::waveform::WaveformSet::columns`].
pub(crate) fn channel_row<'a, S: Slots + ?Sized>(
    p: &'a ScheduleProgram,
    s: &'a S,
) -> impl Iterator<Item = f64> + 'a {
    p.channels
        .iter()
        .flat_map(move |&(_, slot)| (0..p.width).map(move |k| s.get(slot * p.width + k)))
}

// SPDX-License-Identifier: Apache-2.0

//! Test-side oracles built only on the circuit data structure: a
//! cycle-accurate simulator with its own evaluation order and metric
//! bookkeeping.

#![allow(dead_code)]

use std::collections::VecDeque;

use trojanbmc::netlist::{Circuit, GateId, GateKind, NetId};
use trojanbmc::sidechannel::CircuitModel;

pub struct Sim<'c> {
    pub c: &'c Circuit,
    order: Vec<GateId>,
}

impl<'c> Sim<'c> {
    /// Kahn order over combinational gates; PIs and flip-flop outputs are
    /// sources.
    pub fn new(c: &'c Circuit) -> Self {
        assert!(c.latch_cuts().is_empty(), "oracle handles DFF-cut circuits only");
        let gates = c.gates();
        let comb: Vec<&trojanbmc::netlist::Gate> =
            gates.iter().filter(|g| g.kind != GateKind::Dff).collect();
        let mut driver = vec![None; c.nets().len()];
        for g in &comb {
            driver[g.output.index()] = Some(g.id);
        }
        let mut indeg = vec![0usize; gates.len()];
        let mut users: Vec<Vec<GateId>> = vec![Vec::new(); gates.len()];
        for g in &comb {
            for n in &g.inputs {
                if let Some(d) = driver[n.index()] {
                    indeg[g.id.index()] += 1;
                    users[d.index()].push(g.id);
                }
            }
        }
        let mut q: VecDeque<GateId> = comb
            .iter()
            .filter(|g| indeg[g.id.index()] == 0)
            .map(|g| g.id)
            .collect();
        let mut order = Vec::new();
        while let Some(g) = q.pop_front() {
            order.push(g);
            for &u in &users[g.index()] {
                indeg[u.index()] -= 1;
                if indeg[u.index()] == 0 {
                    q.push_back(u);
                }
            }
        }
        assert_eq!(order.len(), comb.len(), "combinational cycle");
        Sim { c, order }
    }

    pub fn state_width(&self) -> usize {
        self.c.flipflops().len()
    }

    pub fn input_width(&self) -> usize {
        self.c.primary_inputs().len()
    }

    pub fn settle(&self, state: &[bool], input: &[bool]) -> Vec<bool> {
        let c = self.c;
        let mut v = vec![false; c.nets().len()];
        for (i, pi) in c.primary_inputs().iter().enumerate() {
            v[pi.index()] = input[i];
        }
        for (i, ff) in c.flipflops().iter().enumerate() {
            v[c.gate(*ff).output.index()] = state[i];
        }
        for &g in &self.order {
            let g = c.gate(g);
            let ins: Vec<bool> = g.inputs.iter().map(|n| v[n.index()]).collect();
            v[g.output.index()] = eval(g.kind, &ins);
        }
        v
    }

    pub fn latch(&self, values: &[bool]) -> Vec<bool> {
        self.c
            .flipflops()
            .iter()
            .map(|ff| values[self.c.gate(*ff).inputs[0].index()])
            .collect()
    }

    pub fn outputs(&self, values: &[bool]) -> Vec<bool> {
        self.c
            .primary_outputs()
            .iter()
            .map(|n| values[n.index()])
            .collect()
    }
}

pub fn eval(kind: GateKind, ins: &[bool]) -> bool {
    let all = ins.iter().all(|&b| b);
    let any = ins.iter().any(|&b| b);
    let odd = ins.iter().filter(|&&b| b).count() % 2 == 1;
    match kind {
        GateKind::And => all,
        GateKind::Nand => !all,
        GateKind::Or => any,
        GateKind::Nor => !any,
        GateKind::Xor => odd,
        GateKind::Xnor => !odd,
        GateKind::Not => !ins[0],
        GateKind::Buf | GateKind::Dff => ins[0],
    }
}

/// Gate input-state index: inputs MSB first; a flip-flop is `D<<1 | Q`.
pub fn state_index(c: &Circuit, g: GateId, v: &[bool]) -> usize {
    let g = c.gate(g);
    if g.kind == GateKind::Dff {
        return (v[g.inputs[0].index()] as usize) * 2 + v[g.output.index()] as usize;
    }
    let mut s = 0;
    for n in &g.inputs {
        s = s * 2 + v[n.index()] as usize;
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct Label {
    pub dp: f64,
    pub lp: f64,
    pub delays: Vec<f64>,
}

/// DP over toggling outputs, LP at the new states, path delay per gate
/// transition.
pub fn label(
    c: &Circuit,
    m: &CircuitModel,
    paths: &[Vec<GateId>],
    prev: &[bool],
    cur: &[bool],
) -> Label {
    let mut dp = 0.0;
    let mut lp = 0.0;
    for g in c.gates() {
        let gm = &m.gates[g.id.index()];
        if prev[g.output.index()] != cur[g.output.index()] {
            dp += gm.dp_coeff;
        }
        lp += gm.leak[state_index(c, g.id, cur)];
    }
    let delays = paths
        .iter()
        .map(|p| {
            p.iter()
                .map(|&g| {
                    m.gates[g.index()].delay[state_index(c, g, prev)][state_index(c, g, cur)]
                })
                .sum()
        })
        .collect();
    Label { dp, lp, delays }
}

/// Bits of `x` over `width` positions, first position most significant.
pub fn bits(x: u64, width: usize) -> Vec<bool> {
    (0..width).map(|i| (x >> (width - 1 - i)) & 1 == 1).collect()
}

#[derive(Clone, Debug)]
pub struct OracleStep {
    pub depth: usize,
    pub prev_state: Vec<bool>,
    pub prev_input: Vec<bool>,
    pub input: Vec<bool>,
    pub state: Vec<bool>,
    pub label: Label,
}

/// Every input sequence of length 1..=bound from the all-zero reset with
/// all-zero initial inputs, in depth-first pre-order with input vectors in
/// counting order.
pub fn enumerate(
    sim: &Sim,
    m: &CircuitModel,
    paths: &[Vec<GateId>],
    bound: usize,
) -> Vec<OracleStep> {
    let s0 = vec![false; sim.state_width()];
    let i0 = vec![false; sim.input_width()];
    let v0 = sim.settle(&s0, &i0);
    let mut out = Vec::new();
    walk(sim, m, paths, &s0, &i0, &v0, 1, bound, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn walk(
    sim: &Sim,
    m: &CircuitModel,
    paths: &[Vec<GateId>],
    state: &[bool],
    input: &[bool],
    values: &[bool],
    depth: usize,
    bound: usize,
    out: &mut Vec<OracleStep>,
) {
    let n = sim.input_width();
    let next = sim.latch(values);
    for x in 0..(1u64 << n) {
        let i = bits(x, n);
        let v = sim.settle(&next, &i);
        out.push(OracleStep {
            depth,
            prev_state: state.to_vec(),
            prev_input: input.to_vec(),
            input: i.clone(),
            state: next.clone(),
            label: label(sim.c, m, paths, values, &v),
        });
        if depth < bound {
            walk(sim, m, paths, &next, &i, &v, depth + 1, bound, out);
        }
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// One pass/fail line per acceptance item.
pub fn report(id: &str, pass: bool, detail: &str) {
    println!("[{}] criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
}

/// How flip-flops of two circuits are paired.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlipFlops {
    /// Same gate ids; a series chain may rename Q.
    ByGate,
    /// Same Q net names.
    ByName,
}

/// Outputs and next state agree for every (state, input); ports are
/// matched by name.
pub fn equivalent(a: &Circuit, b: &Circuit, ffs: FlipFlops) -> bool {
    let names = |c: &Circuit, ids: &[NetId]| -> Vec<String> {
        ids.iter().map(|n| c.net(*n).name.clone()).collect()
    };
    if names(a, a.primary_inputs()) != names(b, b.primary_inputs())
        || names(a, a.primary_outputs()) != names(b, b.primary_outputs())
    {
        return false;
    }
    let q = |c: &Circuit| -> Vec<NetId> { c.flipflops().iter().map(|g| c.gate(*g).output).collect() };
    // Position in `b`'s state vector of each flip-flop of `a`.
    let perm: Vec<usize> = match ffs {
        FlipFlops::ByGate => {
            if a.flipflops() != b.flipflops() {
                return false;
            }
            (0..a.flipflops().len()).collect()
        }
        FlipFlops::ByName => {
            let qb = names(b, &q(b));
            let mut perm = Vec::new();
            for n in names(a, &q(a)) {
                match qb.iter().position(|m| *m == n) {
                    Some(i) => perm.push(i),
                    None => return false,
                }
            }
            if perm.len() != qb.len() {
                return false;
            }
            perm
        }
    };
    let sa = Sim::new(a);
    let sb = Sim::new(b);
    let (ns, ni) = (sa.state_width(), sa.input_width());
    for s in 0..(1u64 << ns) {
        let st = bits(s, ns);
        let mut sb_state = vec![false; ns];
        for (i, &j) in perm.iter().enumerate() {
            sb_state[j] = st[i];
        }
        for i in 0..(1u64 << ni) {
            let inp = bits(i, ni);
            let va = sa.settle(&st, &inp);
            let vb = sb.settle(&sb_state, &inp);
            let la = sa.latch(&va);
            let lb = sb.latch(&vb);
            if sa.outputs(&va) != sb.outputs(&vb)
                || perm.iter().enumerate().any(|(i, &j)| la[i] != lb[j])
            {
                return false;
            }
        }
    }
    true
}

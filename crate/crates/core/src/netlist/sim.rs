// SPDX-License-Identifier: Apache-2.0

//! Zero-delay logic evaluation.

use super::{Circuit, GateId, NetId};

/// Sequential state: flip-flop outputs in gate-id order, then latch-cut nets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateLayout {
    pub flipflops: Vec<GateId>,
    pub cuts: Vec<NetId>,
}

impl StateLayout {
    pub fn of(c: &Circuit) -> Self {
        StateLayout {
            flipflops: c.flipflops().to_vec(),
            cuts: c.latch_cuts().to_vec(),
        }
    }

    pub fn width(&self) -> usize {
        self.flipflops.len() + self.cuts.len()
    }
}

/// Settles combinational logic on a per-net value vector.
pub struct Evaluator<'c> {
    c: &'c Circuit,
    layout: StateLayout,
}

/// Settle passes allowed before a latch loop is declared oscillating; the
/// last pass's values are kept.
const MAX_SETTLE_PASSES: usize = 16;

impl<'c> Evaluator<'c> {
    pub fn new(c: &'c Circuit) -> Self {
        Evaluator {
            c,
            layout: StateLayout::of(c),
        }
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn circuit(&self) -> &'c Circuit {
        self.c
    }

    /// Writes primary inputs and state bits into `values`.
    pub fn load(&self, values: &mut [bool], inputs: &[bool], state: &[bool]) {
        for (&pi, &v) in self.c.primary_inputs().iter().zip(inputs) {
            values[pi.index()] = v;
        }
        let nff = self.layout.flipflops.len();
        for (i, &ff) in self.layout.flipflops.iter().enumerate() {
            values[self.c.gate(ff).output.index()] = state.get(i).copied().unwrap_or(false);
        }
        for (i, &cut) in self.layout.cuts.iter().enumerate() {
            values[cut.index()] = state.get(nff + i).copied().unwrap_or(false);
        }
    }

    /// Evaluates every combinational gate; returns `false` if a latch loop
    /// failed to stabilise.
    pub fn settle(&self, values: &mut [bool]) -> bool {
        let cuts = &self.layout.cuts;
        let passes = if cuts.is_empty() { 1 } else { MAX_SETTLE_PASSES };
        for _ in 0..passes {
            let before: Vec<bool> = cuts.iter().map(|n| values[n.index()]).collect();
            for &g in self.c.comb_order() {
                let gate = self.c.gate(g);
                let v = gate.kind.eval(gate.inputs.iter().map(|n| values[n.index()]));
                values[gate.output.index()] = v;
            }
            if cuts.iter().zip(&before).all(|(n, &b)| values[n.index()] == b) {
                return true;
            }
        }
        cuts.is_empty()
    }

    pub fn settle_fresh(&self, inputs: &[bool], state: &[bool]) -> Vec<bool> {
        let mut v = vec![false; self.c.nets().len()];
        self.load(&mut v, inputs, state);
        self.settle(&mut v);
        v
    }

    /// State after the clock edge, read from settled values.
    pub fn next_state(&self, values: &[bool]) -> Vec<bool> {
        let mut s = Vec::with_capacity(self.layout.width());
        for &ff in &self.layout.flipflops {
            s.push(values[self.c.gate(ff).inputs[0].index()]);
        }
        for &cut in &self.layout.cuts {
            s.push(values[cut.index()]);
        }
        s
    }

    pub fn outputs(&self, values: &[bool]) -> Vec<bool> {
        self.c
            .primary_outputs()
            .iter()
            .map(|n| values[n.index()])
            .collect()
    }

    /// Primary-output sequence for an input sequence starting from `state`.
    pub fn run(&self, state: &[bool], inputs: &[Vec<bool>]) -> Vec<Vec<bool>> {
        let mut s = state.to_vec();
        let mut out = Vec::with_capacity(inputs.len());
        let mut v = vec![false; self.c.nets().len()];
        for i in inputs {
            self.load(&mut v, i, &s);
            self.settle(&mut v);
            out.push(self.outputs(&v));
            s = self.next_state(&v);
        }
        out
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Finite transition systems over decomposed circuits.
//!
//! A transition at step `t` is the move from `(s_{t-1}, i_{t-1})` to
//! `(s_t, i_t)` where `s_t` is the state latched from the settled values of
//! step `t-1`. Its label is computed from the two settled value vectors:
//! dynamic power from output toggles, leakage from the new input states and
//! path delay from per-gate input-state transitions. Step 0 is the reset
//! state with all inputs low.

mod bits;
mod coverage;
mod explore;
mod partition;
mod smv;

pub use bits::Bits;
pub use coverage::{estimate_coverage, CoverageReport, CoverageRow, SECONDS_PER_YEAR};
pub use explore::{
    explore, exhaustive_transitions, ExploreConfig, ExploreStats, Explorer, InputPolicy, Step,
    DEFAULT_BUDGET,
};
pub use partition::{partition, Partition};
pub use smv::export_smv;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{CellKind, Circuit, GateId, StateLayout};
use crate::sidechannel::{input_state, CircuitModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExploreError {
    #[error("circuit is not decomposed into NAND2/NOR2/NOT/DFF")]
    NotDecomposed,
    #[error("exploration needs {required} transitions, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("bound must be at least 1")]
    ZeroBound,
    #[error("state width {got} does not match circuit ({expected})")]
    Width { expected: usize, got: usize },
}

/// Side-channel metric families.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    Dp,
    Lp,
    Delay,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Dp, Metric::Lp, Metric::Delay];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Dp => "dp",
            Metric::Lp => "lp",
            Metric::Delay => "delay",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dp" => Some(Metric::Dp),
            "lp" => Some(Metric::Lp),
            "delay" => Some(Metric::Delay),
            _ => None,
        }
    }
}

/// Which metrics a valuation computes.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricMask {
    pub dp: bool,
    pub lp: bool,
    pub delay: bool,
}

impl MetricMask {
    pub const ALL: MetricMask = MetricMask {
        dp: true,
        lp: true,
        delay: true,
    };
}

impl Default for MetricMask {
    fn default() -> Self {
        MetricMask::ALL
    }
}

/// Side-channel label of one transition. Metrics outside the mask are 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValuation {
    pub dp: f64,
    pub lp: f64,
    /// One entry per monitored path.
    pub delays: Vec<f64>,
}

#[derive(Copy, Clone, Debug)]
enum Op {
    Nand(u32, u32, u32),
    Nor(u32, u32, u32),
    Not(u32, u32),
}

/// Transition system with side-channel labels from one [`CircuitModel`].
#[derive(Clone, Debug)]
pub struct TransitionSystem {
    circuit: Circuit,
    model: CircuitModel,
    paths: Vec<Vec<GateId>>,
    layout: StateLayout,
    ops: Vec<Op>,
    reset: Bits,
}

const MAX_SETTLE_PASSES: usize = 16;

impl TransitionSystem {
    /// `paths` are the monitored delay paths, as gate sequences of `c`.
    pub fn build(
        c: &Circuit,
        model: CircuitModel,
        paths: Vec<Vec<GateId>>,
    ) -> Result<Self, ExploreError> {
        if !c.is_decomposed() {
            return Err(ExploreError::NotDecomposed);
        }
        let ops = c
            .comb_order()
            .iter()
            .map(|&g| {
                let gate = c.gate(g);
                let o = gate.output.0;
                match gate.cell().expect("decomposed") {
                    CellKind::Nand2 => Op::Nand(gate.inputs[0].0, gate.inputs[1].0, o),
                    CellKind::Nor2 => Op::Nor(gate.inputs[0].0, gate.inputs[1].0, o),
                    CellKind::Not => Op::Not(gate.inputs[0].0, o),
                }
            })
            .collect();
        let layout = StateLayout::of(c);
        let reset = Bits::zeros(layout.width());
        Ok(TransitionSystem {
            circuit: c.clone(),
            model,
            paths,
            layout,
            ops,
            reset,
        })
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn model(&self) -> &CircuitModel {
        &self.model
    }

    pub fn paths(&self) -> &[Vec<GateId>] {
        &self.paths
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn state_width(&self) -> usize {
        self.layout.width()
    }

    pub fn input_width(&self) -> usize {
        self.circuit.primary_inputs().len()
    }

    pub fn reset_state(&self) -> &Bits {
        &self.reset
    }

    pub fn set_reset_state(&mut self, s: Bits) -> Result<(), ExploreError> {
        if s.width() != self.state_width() {
            return Err(ExploreError::Width {
                expected: self.state_width(),
                got: s.width(),
            });
        }
        self.reset = s;
        Ok(())
    }

    /// Settled net values for `(state, input)`.
    pub fn settle_into(&self, state: &Bits, input: &Bits, values: &mut Vec<bool>) {
        values.clear();
        values.resize(self.circuit.nets().len(), false);
        for (i, &pi) in self.circuit.primary_inputs().iter().enumerate() {
            values[pi.index()] = input.get(i);
        }
        let nff = self.layout.flipflops.len();
        for (i, &ff) in self.layout.flipflops.iter().enumerate() {
            values[self.circuit.gate(ff).output.index()] = state.get(i);
        }
        for (i, &cut) in self.layout.cuts.iter().enumerate() {
            values[cut.index()] = state.get(nff + i);
        }
        let passes = if self.layout.cuts.is_empty() {
            1
        } else {
            MAX_SETTLE_PASSES
        };
        for _ in 0..passes {
            let before: Bits = self.cut_bits(values);
            for op in &self.ops {
                match *op {
                    Op::Nand(a, b, o) => {
                        values[o as usize] = !(values[a as usize] && values[b as usize])
                    }
                    Op::Nor(a, b, o) => {
                        values[o as usize] = !(values[a as usize] || values[b as usize])
                    }
                    Op::Not(a, o) => values[o as usize] = !values[a as usize],
                }
            }
            if self.cut_bits(values) == before {
                break;
            }
        }
    }

    fn cut_bits(&self, values: &[bool]) -> Bits {
        Bits::from_fn(self.layout.cuts.len(), |i| values[self.layout.cuts[i].index()])
    }

    pub fn settle(&self, state: &Bits, input: &Bits) -> Vec<bool> {
        let mut v = Vec::new();
        self.settle_into(state, input, &mut v);
        v
    }

    /// State latched from settled values.
    pub fn next_state(&self, values: &[bool]) -> Bits {
        let nff = self.layout.flipflops.len();
        Bits::from_fn(self.layout.width(), |i| {
            if i < nff {
                values[self.circuit.gate(self.layout.flipflops[i]).inputs[0].index()]
            } else {
                values[self.layout.cuts[i - nff].index()]
            }
        })
    }

    /// Current state read from settled values.
    pub fn state_of(&self, values: &[bool]) -> Bits {
        let nff = self.layout.flipflops.len();
        Bits::from_fn(self.layout.width(), |i| {
            if i < nff {
                values[self.circuit.gate(self.layout.flipflops[i]).output.index()]
            } else {
                values[self.layout.cuts[i - nff].index()]
            }
        })
    }

    pub fn input_of(&self, values: &[bool]) -> Bits {
        let pis = self.circuit.primary_inputs();
        Bits::from_fn(pis.len(), |i| values[pis[i].index()])
    }

    /// Label of the move between two settled value vectors.
    pub fn valuation(&self, prev: &[bool], cur: &[bool], mask: MetricMask) -> MetricValuation {
        let gates = self.circuit.gates();
        let mut dp = 0.0;
        let mut lp = 0.0;
        if mask.dp || mask.lp {
            for (g, m) in gates.iter().zip(&self.model.gates) {
                if mask.dp {
                    let o = g.output.index();
                    if prev[o] != cur[o] {
                        dp += m.dp_coeff;
                    }
                }
                if mask.lp {
                    lp += m.leak[input_state(g, cur)];
                }
            }
        }
        let delays = if mask.delay {
            self.paths
                .iter()
                .map(|p| {
                    p.iter()
                        .map(|&g| {
                            let gate = &gates[g.index()];
                            self.model.gates[g.index()].delay[input_state(gate, prev)]
                                [input_state(gate, cur)]
                        })
                        .sum()
                })
                .collect()
        } else {
            Vec::new()
        };
        MetricValuation { dp, lp, delays }
    }

    /// Label of the transition `(state, input, next_input)`.
    pub fn label(
        &self,
        state: &Bits,
        input: &Bits,
        next_input: &Bits,
        mask: MetricMask,
    ) -> (MetricValuation, Bits) {
        let prev = self.settle(state, input);
        let next = self.next_state(&prev);
        let cur = self.settle(&next, next_input);
        (self.valuation(&prev, &cur, mask), next)
    }

    /// Per-gate contributions of one transition to DP, LP and each
    /// monitored path.
    pub fn gate_contributions(&self, prev: &[bool], cur: &[bool]) -> GateContributions {
        let gates = self.circuit.gates();
        let mut dp = vec![0.0; gates.len()];
        let mut lp = vec![0.0; gates.len()];
        let mut delay = vec![0.0; gates.len()];
        for (g, m) in gates.iter().zip(&self.model.gates) {
            let i = g.id.index();
            if prev[g.output.index()] != cur[g.output.index()] {
                dp[i] = m.dp_coeff;
            }
            lp[i] = m.leak[input_state(g, cur)];
            delay[i] = m.delay[input_state(g, prev)][input_state(g, cur)];
        }
        GateContributions { dp, lp, delay }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateContributions {
    pub dp: Vec<f64>,
    pub lp: Vec<f64>,
    pub delay: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;
    use crate::sidechannel::ModelOptions;
    use crate::techmodel::TechnologyParams;

    fn system(text: &str) -> TransitionSystem {
        let c = parse_bench("t", text).unwrap();
        let m = CircuitModel::new(&c, &TechnologyParams::nominal_45nm(), &ModelOptions::default())
            .unwrap();
        TransitionSystem::build(&c, m, vec![]).unwrap()
    }

    #[test]
    fn toggle_automaton() {
        let sys = system("OUTPUT(q)\nq = DFF(d)\nd = NOT(q)\n");
        let mut s = sys.reset_state().clone();
        let none = Bits::zeros(0);
        let mut seen = vec![];
        for _ in 0..4 {
            let v = sys.settle(&s, &none);
            s = sys.next_state(&v);
            seen.push(s.get(0));
        }
        assert_eq!(seen, vec![true, false, true, false]);
    }

    #[test]
    fn combinational_single_state() {
        let sys = system("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n");
        assert_eq!(sys.state_width(), 0);
        let (v, next) = sys.label(&Bits::zeros(0), &Bits::from_bools(&[false]), &Bits::from_bools(&[true]), MetricMask::ALL);
        assert_eq!(next.width(), 0);
        assert!(v.dp > 0.0);
        assert!(v.lp > 0.0);
    }

    #[test]
    fn rejects_undecomposed() {
        let c = parse_bench("t", "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n").unwrap();
        let m = CircuitModel { gates: vec![] };
        assert_eq!(
            TransitionSystem::build(&c, m, vec![]).unwrap_err(),
            ExploreError::NotDecomposed
        );
    }
}

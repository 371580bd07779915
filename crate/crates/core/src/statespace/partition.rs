// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Metric;
use crate::netlist::{Circuit, Driver, GateId, NetId};
use crate::sidechannel::BoundEnvelope;

/// Fan-in cone of one cut signal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub id: usize,
    pub metric: Metric,
    pub cut: NetId,
    /// Every gate in the cone, ascending.
    pub gates: Vec<GateId>,
    /// Gates whose contribution this partition accounts for. Each gate is
    /// owned by exactly one partition.
    pub owned: Vec<GateId>,
}

impl Partition {
    /// Sum of owned per-gate maxima for the partition's metric.
    pub fn local_bound(&self, env: &BoundEnvelope) -> f64 {
        let v = match self.metric {
            Metric::Dp => &env.gate_dp_max,
            Metric::Lp => &env.gate_lp_max,
            Metric::Delay => &env.gate_delay_max,
        };
        self.owned.iter().map(|g| v[g.index()]).sum()
    }

    /// Sum of owned entries of a per-gate vector.
    pub fn local_sum(&self, per_gate: &[f64]) -> f64 {
        self.owned.iter().map(|g| per_gate[g.index()]).sum()
    }
}

/// Cut signals: DFF data nets, primary outputs, latch cuts and nets
/// without sinks, ascending by net id.
fn cut_signals(c: &Circuit) -> Vec<NetId> {
    let mut cuts = BTreeSet::new();
    for &ff in c.flipflops() {
        cuts.insert(c.gate(ff).inputs[0]);
    }
    cuts.extend(c.primary_outputs().iter().copied());
    cuts.extend(c.latch_cuts().iter().copied());
    for n in c.nets() {
        if n.sinks.is_empty() && matches!(n.driver, Driver::Gate(_)) {
            cuts.insert(n.id);
        }
    }
    cuts.into_iter().collect()
}

/// Cones cut at flip-flop boundaries. Flip-flops belong to the cone of
/// their data net.
pub fn partition(c: &Circuit, metric: Metric) -> Vec<Partition> {
    let mut owner = vec![usize::MAX; c.gates().len()];
    let mut ff_of_d: Vec<Vec<GateId>> = vec![Vec::new(); c.nets().len()];
    for &ff in c.flipflops() {
        ff_of_d[c.gate(ff).inputs[0].index()].push(ff);
    }
    let mut out = Vec::new();
    for (id, cut) in cut_signals(c).into_iter().enumerate() {
        let mut seen = BTreeSet::new();
        let mut stack = vec![cut];
        let mut visited_nets = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if !visited_nets.insert(n) {
                continue;
            }
            let Some(g) = c.driver_gate(n) else { continue };
            if g.is_dff() {
                continue;
            }
            seen.insert(g.id);
            for &i in &g.inputs {
                if i == cut || !c.is_latch_cut(i) {
                    stack.push(i);
                }
            }
        }
        seen.extend(ff_of_d[cut.index()].iter().copied());
        let gates: Vec<GateId> = seen.into_iter().collect();
        let owned = gates
            .iter()
            .copied()
            .filter(|g| {
                if owner[g.index()] == usize::MAX {
                    owner[g.index()] = id;
                    true
                } else {
                    false
                }
            })
            .collect();
        out.push(Partition {
            id,
            metric,
            cut,
            gates,
            owned,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    #[test]
    fn single_output_single_partition() {
        let c = parse_bench(
            "t",
            "INPUT(a)\nINPUT(b)\nOUTPUT(y)\nx = NAND(a, b)\ny = NOT(x)\n",
        )
        .unwrap();
        let p = partition(&c, Metric::Lp);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].gates.len(), 2);
        assert_eq!(p[0].owned, p[0].gates);
    }

    #[test]
    fn disjoint_subcircuits() {
        let c = parse_bench(
            "t",
            "INPUT(a)\nINPUT(b)\nOUTPUT(y)\nOUTPUT(z)\ny = NOT(a)\nz = NOT(b)\n",
        )
        .unwrap();
        let p = partition(&c, Metric::Dp);
        assert_eq!(p.len(), 2);
        assert!(p[0].gates.iter().all(|g| !p[1].gates.contains(g)));
    }

    #[test]
    fn every_gate_owned_once() {
        let c = crate::netlist::decompose_universal(&crate::benchmarks::load("s27").unwrap())
            .unwrap();
        let p = partition(&c, Metric::Lp);
        let mut count = vec![0; c.gates().len()];
        for part in &p {
            for g in &part.owned {
                count[g.index()] += 1;
            }
        }
        assert!(count.iter().all(|&k| k == 1));
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Timing paths and location classes.
//!
//! A path is a sequence of combinational gates from a *source* net (primary
//! input, flip-flop output or latch cut) to an *endpoint* net (primary output,
//! flip-flop data pin, latch cut, or a net with no sinks). Path delay is the
//! sum of caller-supplied per-gate delays.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::{Circuit, Driver, GateId, NetId};

pub const DEFAULT_PATH_LIMIT: usize = 10_000;

/// Relative tolerance used to decide that two path delays tie.
const TIE: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PathClass {
    Critical,
    Noncritical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathDescriptor {
    pub gates: Vec<GateId>,
    pub source: NetId,
    pub sink: NetId,
    pub delay: f64,
    pub class: PathClass,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LocationClass {
    Input,
    Output,
    Feedback,
    Cp,
    Ncp,
}

impl LocationClass {
    pub const ALL: [LocationClass; 5] = [
        LocationClass::Input,
        LocationClass::Output,
        LocationClass::Feedback,
        LocationClass::Cp,
        LocationClass::Ncp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LocationClass::Input => "INPUT",
            LocationClass::Output => "OUTPUT",
            LocationClass::Feedback => "FEEDBACK",
            LocationClass::Cp => "CP",
            LocationClass::Ncp => "NCP",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "INPUT" | "I/P" | "IP" => Some(LocationClass::Input),
            "OUTPUT" | "O/P" | "OP" => Some(LocationClass::Output),
            "FEEDBACK" => Some(LocationClass::Feedback),
            "CP" => Some(LocationClass::Cp),
            "NCP" => Some(LocationClass::Ncp),
            _ => None,
        }
    }
}

impl std::fmt::Display for LocationClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Combinational gate graph annotated with arrival (`head`) and remaining
/// (`tail`) longest-path delays, both inclusive of the gate itself.
#[derive(Clone, Debug)]
pub struct TimingGraph {
    delay: Vec<f64>,
    succ: Vec<Vec<GateId>>,
    pred: Vec<Vec<GateId>>,
    start: Vec<bool>,
    endpoint: Vec<bool>,
    head: Vec<f64>,
    tail: Vec<f64>,
    comb: Vec<GateId>,
}

fn is_source(c: &Circuit, n: NetId) -> bool {
    match c.net(n).driver {
        Driver::Input => true,
        Driver::Gate(g) => c.gate(g).is_dff() || c.is_latch_cut(n),
    }
}

impl TimingGraph {
    /// `delay` is indexed by gate id; flip-flop entries are ignored.
    pub fn new(c: &Circuit, delay: &[f64]) -> Self {
        let ng = c.gates().len();
        assert_eq!(delay.len(), ng, "one delay per gate");
        let mut succ = vec![Vec::new(); ng];
        let mut pred = vec![Vec::new(); ng];
        let mut start = vec![false; ng];
        let mut endpoint = vec![false; ng];
        for &g in c.comb_order() {
            let gate = c.gate(g);
            for &n in &gate.inputs {
                if is_source(c, n) {
                    start[g.index()] = true;
                } else if let Driver::Gate(d) = c.net(n).driver {
                    if !pred[g.index()].contains(&d) {
                        pred[g.index()].push(d);
                    }
                }
            }
            let out = c.net(gate.output);
            let cut = c.is_latch_cut(gate.output);
            endpoint[g.index()] = cut
                || out.sinks.is_empty()
                || c.is_primary_output(gate.output)
                || out.sinks.iter().any(|p| c.gate(p.gate).is_dff());
            if !cut {
                for p in &out.sinks {
                    if !c.gate(p.gate).is_dff() && !succ[g.index()].contains(&p.gate) {
                        succ[g.index()].push(p.gate);
                    }
                }
                succ[g.index()].sort();
            }
        }
        let mut head = vec![f64::NEG_INFINITY; ng];
        let mut tail = vec![f64::NEG_INFINITY; ng];
        for &g in c.comb_order() {
            let i = g.index();
            let mut best: f64 = if start[i] { 0.0 } else { f64::NEG_INFINITY };
            for p in &pred[i] {
                best = best.max(head[p.index()]);
            }
            head[i] = best + delay[i];
        }
        for &g in c.comb_order().iter().rev() {
            let i = g.index();
            let mut best: f64 = if endpoint[i] { 0.0 } else { f64::NEG_INFINITY };
            for s in &succ[i] {
                best = best.max(tail[s.index()]);
            }
            tail[i] = best + delay[i];
        }
        TimingGraph {
            delay: delay.to_vec(),
            succ,
            pred,
            start,
            endpoint,
            head,
            tail,
            comb: c.comb_order().to_vec(),
        }
    }

    pub fn successors(&self, g: GateId) -> &[GateId] {
        &self.succ[g.index()]
    }

    pub fn predecessors(&self, g: GateId) -> &[GateId] {
        &self.pred[g.index()]
    }

    pub fn is_start(&self, g: GateId) -> bool {
        self.start[g.index()]
    }

    pub fn is_endpoint(&self, g: GateId) -> bool {
        self.endpoint[g.index()]
    }

    /// Longest delay of any path ending at `g`'s output.
    pub fn arrival(&self, g: GateId) -> f64 {
        self.head[g.index()]
    }

    /// Longest delay of any path starting at `g`.
    pub fn remaining(&self, g: GateId) -> f64 {
        self.tail[g.index()]
    }

    /// Longest delay over all paths; 0 for a circuit without combinational
    /// gates.
    pub fn max_delay(&self) -> f64 {
        self.comb
            .iter()
            .filter(|g| self.start[g.index()])
            .map(|g| self.tail[g.index()])
            .fold(0.0, f64::max)
    }

    fn ties(a: f64, b: f64) -> bool {
        (a - b).abs() <= TIE * a.abs().max(b.abs())
    }
}

#[derive(Clone, Debug)]
struct Item {
    bound: f64,
    gates: Vec<GateId>,
    prefix: f64,
    complete: bool,
}

impl PartialEq for Item {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    // Max-heap: larger bound first; then lexicographically smaller sequence;
    // complete entries before partial ones with the same key.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.gates.cmp(&self.gates))
            .then_with(|| self.complete.cmp(&other.complete))
    }
}

/// Top-`limit` paths by delay (descending, ties by gate-id sequence).
///
/// Best-first search over partial paths keyed by an exact upper bound, so
/// the first `limit` completed paths are the true top `limit`.
pub fn enumerate_paths(c: &Circuit, delay: &[f64], limit: usize) -> Vec<PathDescriptor> {
    let tg = TimingGraph::new(c, delay);
    enumerate_with(c, &tg, limit, None)
}

fn enumerate_with(
    c: &Circuit,
    tg: &TimingGraph,
    limit: usize,
    roots: Option<Vec<Vec<GateId>>>,
) -> Vec<PathDescriptor> {
    let mut heap = BinaryHeap::new();
    let seeds = roots.unwrap_or_else(|| {
        tg.comb
            .iter()
            .filter(|g| tg.start[g.index()])
            .map(|&g| vec![g])
            .collect()
    });
    for seq in seeds {
        let last = *seq.last().expect("non-empty seed");
        let prefix: f64 = seq.iter().map(|g| tg.delay[g.index()]).sum();
        heap.push(Item {
            bound: prefix - tg.delay[last.index()] + tg.tail[last.index()],
            gates: seq,
            prefix,
            complete: false,
        });
    }
    let mut out = Vec::new();
    while out.len() < limit {
        let Some(item) = heap.pop() else { break };
        let last = *item.gates.last().expect("non-empty path");
        if item.complete {
            out.push(describe(c, tg, item.gates, item.prefix));
            continue;
        }
        if tg.endpoint[last.index()] {
            heap.push(Item {
                bound: item.prefix,
                gates: item.gates.clone(),
                prefix: item.prefix,
                complete: true,
            });
        }
        for &s in &tg.succ[last.index()] {
            let mut gates = item.gates.clone();
            gates.push(s);
            heap.push(Item {
                bound: item.prefix + tg.tail[s.index()],
                prefix: item.prefix + tg.delay[s.index()],
                gates,
                complete: false,
            });
        }
    }
    out
}

fn describe(c: &Circuit, tg: &TimingGraph, gates: Vec<GateId>, delay: f64) -> PathDescriptor {
    let first = c.gate(gates[0]);
    let source = *first
        .inputs
        .iter()
        .find(|&&n| is_source(c, n))
        .unwrap_or(&first.inputs[0]);
    let last = *gates.last().expect("non-empty path");
    let sink = c.gate(last).output;
    let cone_max = tg.head[last.index()];
    let class = if TimingGraph::ties(delay, cone_max) || delay > cone_max {
        PathClass::Critical
    } else {
        PathClass::Noncritical
    };
    PathDescriptor {
        gates,
        source,
        sink,
        delay,
        class,
    }
}

/// Longest path passing through the driver or a sink of `net`.
pub fn worst_path_through(c: &Circuit, delay: &[f64], net: NetId) -> Option<PathDescriptor> {
    let tg = TimingGraph::new(c, delay);
    if is_source(c, net) {
        // Paths leaving a source start at one of its sinks.
        let seeds: Vec<Vec<GateId>> = c
            .net(net)
            .sinks
            .iter()
            .filter(|p| !c.gate(p.gate).is_dff())
            .map(|p| vec![p.gate])
            .collect();
        if seeds.is_empty() {
            return None;
        }
        let mut best = enumerate_with(c, &tg, 1, Some(seeds)).into_iter().next()?;
        best.source = net;
        return Some(best);
    }
    let g = match c.net(net).driver {
        Driver::Gate(g) if !c.gate(g).is_dff() => g,
        _ => return None,
    };
    // Every path through the driver also traverses its output net. Rebuild
    // the longest prefix backwards, then finish with a search.
    let mut prefix = vec![g];
    let mut cur = g;
    loop {
        let need = tg.head[cur.index()] - tg.delay[cur.index()];
        if tg.start[cur.index()] && need <= 0.0 {
            break;
        }
        let Some(&p) = tg.pred[cur.index()]
            .iter()
            .filter(|p| TimingGraph::ties(tg.head[p.index()], need))
            .min()
        else {
            break;
        };
        prefix.push(p);
        cur = p;
    }
    prefix.reverse();
    enumerate_with(c, &tg, 1, Some(vec![prefix])).into_iter().next()
}

/// Location class of every net. Precedence when several apply:
/// INPUT > OUTPUT > FEEDBACK > CP > NCP.
///
/// CP nets lie on at least one path whose delay equals the circuit maximum;
/// FEEDBACK nets lie on a latch loop.
pub fn classify_locations(c: &Circuit, delay: &[f64]) -> BTreeMap<NetId, LocationClass> {
    let tg = TimingGraph::new(c, delay);
    let dmax = tg.max_delay();
    let mut cp = BTreeSet::new();
    if dmax > 0.0 || tg.comb.iter().any(|g| tg.start[g.index()]) {
        for &g in &tg.comb {
            let i = g.index();
            let through = tg.head[i] + tg.tail[i] - tg.delay[i];
            if TimingGraph::ties(through, dmax) {
                cp.insert(c.gate(g).output);
                if tg.start[i] && TimingGraph::ties(tg.tail[i], dmax) {
                    for &n in &c.gate(g).inputs {
                        if is_source(c, n) {
                            cp.insert(n);
                        }
                    }
                }
            }
        }
    }
    let feedback = feedback_nets(c);
    let mut out = BTreeMap::new();
    for n in c.nets() {
        let class = if c.is_primary_input(n.id) {
            LocationClass::Input
        } else if c.is_primary_output(n.id) {
            LocationClass::Output
        } else if feedback.contains(&n.id) {
            LocationClass::Feedback
        } else if cp.contains(&n.id) {
            LocationClass::Cp
        } else {
            LocationClass::Ncp
        };
        out.insert(n.id, class);
    }
    out
}

/// Nets on a combinational loop closed through a latch cut.
fn feedback_nets(c: &Circuit) -> BTreeSet<NetId> {
    let mut all = BTreeSet::new();
    for &cut in c.latch_cuts() {
        // Forward from the cut through combinational gates.
        let mut fwd = BTreeSet::new();
        let mut stack = vec![cut];
        while let Some(n) = stack.pop() {
            for p in &c.net(n).sinks {
                let g = c.gate(p.gate);
                if g.is_dff() {
                    continue;
                }
                if fwd.insert(g.output) && g.output != cut {
                    stack.push(g.output);
                }
            }
        }
        // Backward from the cut.
        let mut bwd = BTreeSet::new();
        let mut stack = vec![cut];
        while let Some(n) = stack.pop() {
            if let Some(g) = c.driver_gate(n) {
                if g.is_dff() {
                    continue;
                }
                for &i in &g.inputs {
                    if bwd.insert(i) && i != cut {
                        stack.push(i);
                    }
                }
            }
        }
        all.insert(cut);
        all.extend(fwd.intersection(&bwd).copied());
    }
    all
}

// SPDX-License-Identifier: Apache-2.0

//! Gate-level sequential netlists.
//!
//! A [`Circuit`] is an immutable graph of nets and gates. Gate kinds cover the
//! ISCAS89 vocabulary (AND/OR/NAND/NOR/XOR/XNOR/NOT/BUF/DFF of any arity) so a
//! parsed netlist keeps its original structure; [`decompose_universal`]
//! rewrites it into NAND2/NOR2/NOT/DFF, which is the form every side-channel
//! model works on.
//!
//! Combinational loops are rejected unless the builder is told to accept
//! latch loops (the cross-coupled storage pair of an expanded flip-flop). In
//! that case each loop is broken at a *cut net* whose previous value seeds the
//! next settle pass; cut nets are part of the sequential state.

mod bench;
mod decompose;
mod generate;
mod paths;
mod sim;

pub use bench::{parse_bench, parse_bench_with, write_bench, ParseOptions};
pub use decompose::decompose_universal;
pub use generate::{generate, GeneratorSpec};
pub use paths::{
    classify_locations, enumerate_paths, worst_path_through, LocationClass, PathClass,
    PathDescriptor, TimingGraph, DEFAULT_PATH_LIMIT,
};
pub use sim::{Evaluator, StateLayout};

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetId(pub u32);

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GateId(pub u32);

impl NetId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl GateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
    Dff,
}

impl GateKind {
    pub const ALL: [GateKind; 9] = [
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
        GateKind::Dff,
    ];

    /// Canonical `.bench` spelling.
    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUFF",
            GateKind::Dff => "DFF",
        }
    }

    /// Case-insensitive lookup; accepts both `BUF` and `BUFF`.
    pub fn from_name(name: &str) -> Option<GateKind> {
        let upper = name.to_ascii_uppercase();
        Some(match upper.as_str() {
            "AND" => GateKind::And,
            "NAND" => GateKind::Nand,
            "OR" => GateKind::Or,
            "NOR" => GateKind::Nor,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            "NOT" | "INV" => GateKind::Not,
            "BUF" | "BUFF" => GateKind::Buf,
            "DFF" => GateKind::Dff,
            _ => return None,
        })
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            GateKind::Not | GateKind::Buf | GateKind::Dff => n == 1,
            GateKind::Xor | GateKind::Xnor => n >= 2,
            GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor => n >= 1,
        }
    }

    /// Boolean function of a combinational gate. Panics on `Dff`.
    pub fn eval(self, inputs: impl IntoIterator<Item = bool>) -> bool {
        let mut it = inputs.into_iter();
        match self {
            GateKind::And => it.all(|v| v),
            GateKind::Nand => !it.all(|v| v),
            GateKind::Or => it.any(|v| v),
            GateKind::Nor => !it.any(|v| v),
            GateKind::Xor => it.fold(false, |a, v| a ^ v),
            GateKind::Xnor => !it.fold(false, |a, v| a ^ v),
            GateKind::Not => !it.next().expect("NOT has one input"),
            GateKind::Buf => it.next().expect("BUF has one input"),
            GateKind::Dff => panic!("DFF is not combinational"),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The three transistor-level cells the side-channel models know about.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CellKind {
    Nand2,
    Nor2,
    Not,
}

impl CellKind {
    pub fn arity(self) -> usize {
        match self {
            CellKind::Nand2 | CellKind::Nor2 => 2,
            CellKind::Not => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Nand2 => "NAND2",
            CellKind::Nor2 => "NOR2",
            CellKind::Not => "NOT",
        }
    }

    pub fn from_name(name: &str) -> Option<CellKind> {
        match name.to_ascii_uppercase().as_str() {
            "NAND2" | "NAND" => Some(CellKind::Nand2),
            "NOR2" | "NOR" => Some(CellKind::Nor2),
            "NOT" | "INV" => Some(CellKind::Not),
            _ => None,
        }
    }

    pub fn gate_kind(self) -> GateKind {
        match self {
            CellKind::Nand2 => GateKind::Nand,
            CellKind::Nor2 => GateKind::Nor,
            CellKind::Not => GateKind::Not,
        }
    }

    /// Output for an input state encoded LSB-last (`0b10` = first input high).
    pub fn output(self, state: u8) -> bool {
        match self {
            CellKind::Nand2 => state != 0b11,
            CellKind::Nor2 => state == 0,
            CellKind::Not => state == 0,
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Driver {
    Input,
    Gate(GateId),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pin {
    pub gate: GateId,
    pub index: u8,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Net {
    pub id: NetId,
    pub name: String,
    pub driver: Driver,
    pub sinks: Vec<Pin>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Gate {
    pub id: GateId,
    pub kind: GateKind,
    pub inputs: Vec<NetId>,
    pub output: NetId,
    /// FO: number of host sinks on the output net, at least 1.
    pub fanout_count: u32,
    /// Inserted by an intrusion; excluded from the host's fanout counts.
    pub foreign: bool,
}

impl Gate {
    /// Side-channel cell for decomposed combinational gates.
    pub fn cell(&self) -> Option<CellKind> {
        match (self.kind, self.inputs.len()) {
            (GateKind::Nand, 2) => Some(CellKind::Nand2),
            (GateKind::Nor, 2) => Some(CellKind::Nor2),
            (GateKind::Not, 1) => Some(CellKind::Not),
            _ => None,
        }
    }

    pub fn is_dff(&self) -> bool {
        self.kind == GateKind::Dff
    }

    pub fn is_universal(&self) -> bool {
        self.is_dff() || self.cell().is_some()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("no gates defined")]
    NoGates,
    #[error("net `{0}` is driven more than once")]
    MultiplyDriven(String),
    #[error("net `{0}` is referenced but never driven")]
    Undriven(String),
    #[error("combinational cycle through net `{0}`")]
    CombinationalCycle(String),
    #[error("unsupported gate kind `{0}`")]
    UnsupportedGate(String),
    #[error("gate driving `{net}`: {kind} cannot take {arity} input(s)")]
    Arity {
        net: String,
        kind: GateKind,
        arity: usize,
    },
    #[error("unknown net `{0}`")]
    UnknownNet(String),
}

/// Immutable gate-level circuit.
#[derive(Clone, Debug)]
pub struct Circuit {
    name: String,
    nets: Vec<Net>,
    gates: Vec<Gate>,
    primary_inputs: Vec<NetId>,
    primary_outputs: Vec<NetId>,
    flipflops: Vec<GateId>,
    latch_cuts: Vec<NetId>,
    comb_order: Vec<GateId>,
    by_name: HashMap<String, NetId>,
}

impl Circuit {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nets(&self) -> &[Net] {
        &self.nets
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn net(&self, id: NetId) -> &Net {
        &self.nets[id.index()]
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.gates[id.index()]
    }

    pub fn primary_inputs(&self) -> &[NetId] {
        &self.primary_inputs
    }

    pub fn primary_outputs(&self) -> &[NetId] {
        &self.primary_outputs
    }

    pub fn flipflops(&self) -> &[GateId] {
        &self.flipflops
    }

    /// Nets that break latch loops; empty for ordinary netlists.
    pub fn latch_cuts(&self) -> &[NetId] {
        &self.latch_cuts
    }

    /// Combinational gates in evaluation order.
    pub fn comb_order(&self) -> &[GateId] {
        &self.comb_order
    }

    pub fn net_by_name(&self, name: &str) -> Option<NetId> {
        self.by_name.get(name).copied()
    }

    pub fn is_primary_output(&self, net: NetId) -> bool {
        self.primary_outputs.contains(&net)
    }

    pub fn is_primary_input(&self, net: NetId) -> bool {
        matches!(self.nets[net.index()].driver, Driver::Input)
    }

    pub fn is_latch_cut(&self, net: NetId) -> bool {
        self.latch_cuts.binary_search(&net).is_ok()
    }

    /// Driving gate of a net, if any.
    pub fn driver_gate(&self, net: NetId) -> Option<&Gate> {
        match self.nets[net.index()].driver {
            Driver::Gate(g) => Some(&self.gates[g.index()]),
            Driver::Input => None,
        }
    }

    pub fn is_dff_output(&self, net: NetId) -> bool {
        self.driver_gate(net).is_some_and(Gate::is_dff)
    }

    /// Feeds the data pin of some flip-flop.
    pub fn feeds_dff(&self, net: NetId) -> bool {
        self.nets[net.index()]
            .sinks
            .iter()
            .any(|p| self.gates[p.gate.index()].is_dff())
    }

    pub fn combinational_gate_count(&self) -> usize {
        self.gates.len() - self.flipflops.len()
    }

    /// Counts per gate kind (arity ignored).
    pub fn histogram(&self) -> std::collections::BTreeMap<GateKind, usize> {
        let mut h = std::collections::BTreeMap::new();
        for g in &self.gates {
            *h.entry(g.kind).or_insert(0) += 1;
        }
        h
    }

    pub fn is_decomposed(&self) -> bool {
        self.gates.iter().all(Gate::is_universal)
    }

    /// Builder seeded with this circuit's contents; ids are preserved and new
    /// nets/gates are appended after the existing ones.
    pub fn to_builder(&self) -> CircuitBuilder {
        let mut b = CircuitBuilder::new(&self.name);
        b.allow_latch_loops = !self.latch_cuts.is_empty();
        for n in &self.nets {
            b.net(&n.name);
        }
        for &pi in &self.primary_inputs {
            b.nets[pi.index()].driven = true;
            b.inputs.push(pi);
        }
        for g in &self.gates {
            b.gates.push(GateSpec {
                kind: g.kind,
                inputs: g.inputs.clone(),
                output: g.output,
                foreign: g.foreign,
            });
            b.nets[g.output.index()].driven = true;
        }
        b.outputs = self.primary_outputs.clone();
        b.forced_cuts = self.latch_cuts.clone();
        b
    }
}

#[derive(Clone, Debug)]
struct NetSpec {
    name: String,
    driven: bool,
}

#[derive(Clone, Debug)]
struct GateSpec {
    kind: GateKind,
    inputs: Vec<NetId>,
    output: NetId,
    foreign: bool,
}

/// Incremental circuit construction with validation at [`build`](Self::build).
#[derive(Clone, Debug)]
pub struct CircuitBuilder {
    name: String,
    nets: Vec<NetSpec>,
    by_name: HashMap<String, NetId>,
    gates: Vec<GateSpec>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    forced_cuts: Vec<NetId>,
    /// Accept combinational loops, breaking each at a cut net.
    pub allow_latch_loops: bool,
}

impl CircuitBuilder {
    pub fn new(name: &str) -> Self {
        CircuitBuilder {
            name: name.to_string(),
            nets: Vec::new(),
            by_name: HashMap::new(),
            gates: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            forced_cuts: Vec::new(),
            allow_latch_loops: false,
        }
    }

    /// Net with the given name, created on first use.
    pub fn net(&mut self, name: &str) -> NetId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = NetId(self.nets.len() as u32);
        self.nets.push(NetSpec {
            name: name.to_string(),
            driven: false,
        });
        self.by_name.insert(name.to_string(), id);
        id
    }

    /// New net whose name starts with `base` and is not yet taken.
    pub fn fresh_net(&mut self, base: &str) -> NetId {
        if !self.by_name.contains_key(base) {
            return self.net(base);
        }
        let mut k = 1usize;
        loop {
            let cand = format!("{base}_{k}");
            if !self.by_name.contains_key(&cand) {
                return self.net(&cand);
            }
            k += 1;
        }
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.nets[id.index()].name
    }

    pub fn lookup(&self, name: &str) -> Option<NetId> {
        self.by_name.get(name).copied()
    }

    pub fn input(&mut self, name: &str) -> Result<NetId, NetlistError> {
        let id = self.net(name);
        if self.nets[id.index()].driven {
            return Err(NetlistError::MultiplyDriven(name.to_string()));
        }
        self.nets[id.index()].driven = true;
        self.inputs.push(id);
        Ok(id)
    }

    pub fn output(&mut self, name: &str) -> NetId {
        let id = self.net(name);
        if !self.outputs.contains(&id) {
            self.outputs.push(id);
        }
        id
    }

    pub fn gate(
        &mut self,
        kind: GateKind,
        inputs: &[NetId],
        output: NetId,
    ) -> Result<GateId, NetlistError> {
        self.push_gate(kind, inputs, output, false)
    }

    pub fn foreign_gate(
        &mut self,
        kind: GateKind,
        inputs: &[NetId],
        output: NetId,
    ) -> Result<GateId, NetlistError> {
        self.push_gate(kind, inputs, output, true)
    }

    fn push_gate(
        &mut self,
        kind: GateKind,
        inputs: &[NetId],
        output: NetId,
        foreign: bool,
    ) -> Result<GateId, NetlistError> {
        let out_name = self.nets[output.index()].name.clone();
        if !kind.arity_ok(inputs.len()) {
            return Err(NetlistError::Arity {
                net: out_name,
                kind,
                arity: inputs.len(),
            });
        }
        if self.nets[output.index()].driven {
            return Err(NetlistError::MultiplyDriven(out_name));
        }
        self.nets[output.index()].driven = true;
        let id = GateId(self.gates.len() as u32);
        self.gates.push(GateSpec {
            kind,
            inputs: inputs.to_vec(),
            output,
            foreign,
        });
        Ok(id)
    }

    /// Moves the driver of `from` onto `to`; `from` becomes undriven.
    pub(crate) fn redirect_driver(&mut self, from: NetId, to: NetId) -> Option<GateId> {
        let idx = self.gates.iter().position(|g| g.output == from)?;
        self.gates[idx].output = to;
        self.nets[from.index()].driven = false;
        self.nets[to.index()].driven = true;
        Some(GateId(idx as u32))
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn build(self) -> Result<Circuit, NetlistError> {
        if self.gates.is_empty() {
            return Err(NetlistError::NoGates);
        }
        let mut drivers: Vec<Option<Driver>> = vec![None; self.nets.len()];
        for &pi in &self.inputs {
            drivers[pi.index()] = Some(Driver::Input);
        }
        for (i, g) in self.gates.iter().enumerate() {
            drivers[g.output.index()] = Some(Driver::Gate(GateId(i as u32)));
        }
        // Unreferenced, undriven nets (left behind by rewiring) are dropped by
        // compaction below; referenced ones are an error.
        let mut referenced = vec![false; self.nets.len()];
        for g in &self.gates {
            for &i in &g.inputs {
                referenced[i.index()] = true;
            }
        }
        for &o in &self.outputs {
            referenced[o.index()] = true;
        }
        for (i, d) in drivers.iter().enumerate() {
            if d.is_none() && referenced[i] {
                return Err(NetlistError::Undriven(self.nets[i].name.clone()));
            }
        }
        // Compact net ids so every net has a driver.
        let mut remap = vec![u32::MAX; self.nets.len()];
        let mut nets = Vec::new();
        for (i, spec) in self.nets.iter().enumerate() {
            if let Some(d) = drivers[i] {
                remap[i] = nets.len() as u32;
                nets.push(Net {
                    id: NetId(nets.len() as u32),
                    name: spec.name.clone(),
                    driver: d,
                    sinks: Vec::new(),
                });
            }
        }
        let map = |n: NetId| NetId(remap[n.index()]);
        let mut gates: Vec<Gate> = self
            .gates
            .iter()
            .enumerate()
            .map(|(i, g)| Gate {
                id: GateId(i as u32),
                kind: g.kind,
                inputs: g.inputs.iter().map(|&n| map(n)).collect(),
                output: map(g.output),
                fanout_count: 1,
                foreign: g.foreign,
            })
            .collect();
        for g in &gates {
            for (pin, &inp) in g.inputs.iter().enumerate() {
                nets[inp.index()].sinks.push(Pin {
                    gate: g.id,
                    index: pin as u8,
                });
            }
        }
        for g in &mut gates {
            let host = nets[g.output.index()]
                .sinks
                .iter()
                .filter(|p| !self.gates[p.gate.index()].foreign)
                .count();
            g.fanout_count = host.max(1) as u32;
        }
        let primary_inputs: Vec<NetId> = self.inputs.iter().map(|&n| map(n)).collect();
        let primary_outputs: Vec<NetId> = self.outputs.iter().map(|&n| map(n)).collect();
        let flipflops: Vec<GateId> = gates.iter().filter(|g| g.is_dff()).map(|g| g.id).collect();
        let forced: Vec<NetId> = self
            .forced_cuts
            .iter()
            .filter(|n| remap[n.index()] != u32::MAX)
            .map(|&n| map(n))
            .collect();
        let (comb_order, mut latch_cuts) =
            order_gates(&nets, &gates, &forced, self.allow_latch_loops)?;
        latch_cuts.sort();
        latch_cuts.dedup();
        let by_name = nets.iter().map(|n| (n.name.clone(), n.id)).collect();
        Ok(Circuit {
            name: self.name,
            nets,
            gates,
            primary_inputs,
            primary_outputs,
            flipflops,
            latch_cuts,
            comb_order,
            by_name,
        })
    }
}

/// Depth-first post-order over combinational gates. Back edges either fail
/// the build or, with latch loops allowed, mark their net as a cut.
fn order_gates(
    nets: &[Net],
    gates: &[Gate],
    forced_cuts: &[NetId],
    allow_loops: bool,
) -> Result<(Vec<GateId>, Vec<NetId>), NetlistError> {
    #[derive(Copy, Clone, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; gates.len()];
    let mut is_cut = vec![false; nets.len()];
    for &c in forced_cuts {
        is_cut[c.index()] = true;
    }
    let mut cuts: Vec<NetId> = forced_cuts.to_vec();
    let mut order = Vec::with_capacity(gates.len());
    let comb_driver = |n: NetId| match nets[n.index()].driver {
        Driver::Gate(g) if !gates[g.index()].is_dff() => Some(g),
        _ => None,
    };
    for root in gates.iter().filter(|g| !g.is_dff()) {
        if mark[root.id.index()] != Mark::New {
            continue;
        }
        // (gate, next input position)
        let mut stack: Vec<(GateId, usize)> = vec![(root.id, 0)];
        mark[root.id.index()] = Mark::Active;
        while let Some(&mut (g, ref mut pos)) = stack.last_mut() {
            let gate = &gates[g.index()];
            if *pos < gate.inputs.len() {
                let n = gate.inputs[*pos];
                *pos += 1;
                if is_cut[n.index()] {
                    continue;
                }
                if let Some(d) = comb_driver(n) {
                    match mark[d.index()] {
                        Mark::New => {
                            mark[d.index()] = Mark::Active;
                            stack.push((d, 0));
                        }
                        Mark::Active => {
                            if !allow_loops {
                                return Err(NetlistError::CombinationalCycle(
                                    nets[n.index()].name.clone(),
                                ));
                            }
                            is_cut[n.index()] = true;
                            cuts.push(n);
                        }
                        Mark::Done => {}
                    }
                }
            } else {
                mark[g.index()] = Mark::Done;
                order.push(g);
                stack.pop();
            }
        }
    }
    Ok((order, cuts))
}

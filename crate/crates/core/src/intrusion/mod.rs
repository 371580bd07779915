// SPDX-License-Identifier: Apache-2.0

//! Trojan insertion: load-only taps and transparent in-path chains.
//!
//! Intruded gates are marked foreign. They do not count towards a host
//! net's fanout; their input pins are accounted as C_int instead.

mod detect;

pub use detect::{detector, min_detectable_at, min_detectable_size, sweep, DetectionSetup, Probe, SweepRow};

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{
    classify_locations, CellKind, Circuit, GateId, GateKind, LocationClass, NetId, NetlistError,
};
use crate::sidechannel::{intrusion_load, CircuitModel, ModelOptions, SideChannelError};
use crate::statespace::ExploreError;
use crate::techmodel::TechnologyParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntrusionError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    SideChannel(#[from] SideChannelError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error("circuit has no {0} nets to intrude")]
    NoCandidate(LocationClass),
    #[error("unknown net `{0}`")]
    UnknownNet(String),
    #[error("series insertion on primary input `{0}`")]
    SeriesOnInput(String),
    #[error("series chains need an even gate count, got {0}")]
    OddSeriesSize(usize),
    #[error("intrusion size must be at least 1")]
    ZeroSize,
    #[error("base circuit must be decomposed")]
    NotDecomposed,
    #[error("no trigger net available")]
    NoTrigger,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    Net(String),
    Class(LocationClass),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Net(n) => write!(f, "net:{n}"),
            Target::Class(c) => f.write_str(c.name()),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IntrusionMode {
    Parallel,
    Series,
}

impl IntrusionMode {
    pub fn name(self) -> &'static str {
        match self {
            IntrusionMode::Parallel => "PARALLEL",
            IntrusionMode::Series => "SERIES",
        }
    }
}

/// How a parallel two-input gate attaches to its host net.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attachment {
    /// Both inputs tied to the host net.
    #[default]
    Both,
    /// First input on the host net, second on the trigger net.
    Single,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntrusionSpec {
    pub target: Target,
    pub mode: IntrusionMode,
    pub size: usize,
    pub kind: CellKind,
    pub seed: u64,
    pub attach: Attachment,
    /// XOR the host net with the trigger net after insertion.
    pub payload: bool,
    /// Defaults to the first primary input.
    pub trigger: Option<String>,
}

impl IntrusionSpec {
    pub fn parallel(target: Target, size: usize) -> Self {
        IntrusionSpec {
            target,
            mode: IntrusionMode::Parallel,
            size,
            kind: CellKind::Nand2,
            seed: 0,
            attach: Attachment::Both,
            payload: false,
            trigger: None,
        }
    }

    pub fn series(target: Target, size: usize) -> Self {
        IntrusionSpec {
            mode: IntrusionMode::Series,
            ..IntrusionSpec::parallel(target, size)
        }
    }

    /// `TARGET MODE SIZE [KIND [SEED]] [attach=both|single] [payload=TRIGGER]`
    /// where TARGET is a location class or `net:NAME`.
    pub fn parse_line(line: &str, lineno: usize) -> Result<Option<Self>, IntrusionError> {
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            return Ok(None);
        }
        let err = |m: String| IntrusionError::Parse {
            line: lineno,
            message: m,
        };
        let mut positional = Vec::new();
        let mut attach = Attachment::Both;
        let mut payload = None;
        for tok in text.split_whitespace() {
            match tok.split_once('=') {
                Some(("attach", v)) => {
                    attach = match v.to_ascii_lowercase().as_str() {
                        "both" => Attachment::Both,
                        "single" => Attachment::Single,
                        _ => return Err(err(format!("bad attachment `{v}`"))),
                    }
                }
                Some(("payload", v)) => payload = Some(v.to_string()),
                Some((k, _)) => return Err(err(format!("unknown key `{k}`"))),
                None => positional.push(tok),
            }
        }
        if positional.len() < 3 || positional.len() > 5 {
            return Err(err("expected TARGET MODE SIZE [KIND [SEED]]".into()));
        }
        let target = match positional[0].strip_prefix("net:") {
            Some(n) => Target::Net(n.to_string()),
            None => Target::Class(
                LocationClass::from_name(positional[0])
                    .ok_or_else(|| err(format!("unknown location `{}`", positional[0])))?,
            ),
        };
        let mode = match positional[1].to_ascii_lowercase().as_str() {
            "parallel" => IntrusionMode::Parallel,
            "series" => IntrusionMode::Series,
            m => return Err(err(format!("unknown mode `{m}`"))),
        };
        let size = positional[2]
            .parse()
            .map_err(|_| err(format!("bad size `{}`", positional[2])))?;
        let kind = match positional.get(3) {
            Some(k) => CellKind::from_name(k).ok_or_else(|| err(format!("unknown cell `{k}`")))?,
            None => CellKind::Nand2,
        };
        let seed = match positional.get(4) {
            Some(s) => s.parse().map_err(|_| err(format!("bad seed `{s}`")))?,
            None => 0,
        };
        Ok(Some(IntrusionSpec {
            target,
            mode,
            size,
            kind,
            seed,
            attach,
            payload: payload.is_some(),
            trigger: payload.filter(|t| !t.is_empty()),
        }))
    }

    pub fn parse_file(text: &str) -> Result<Vec<Self>, IntrusionError> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(s) = Self::parse_line(line, i + 1)? {
                out.push(s);
            }
        }
        Ok(out)
    }

    pub fn to_line(&self) -> String {
        let mut s = format!(
            "{} {} {} {} {}",
            self.target,
            self.mode.name().to_ascii_lowercase(),
            self.size,
            self.kind.name(),
            self.seed
        );
        if self.attach == Attachment::Single {
            s.push_str(" attach=single");
        }
        if self.payload {
            s.push_str(&format!(" payload={}", self.trigger.as_deref().unwrap_or("")));
        }
        s
    }
}

/// Record of one applied spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppliedIntrusion {
    pub spec: IntrusionSpec,
    /// Host net, by base-circuit id.
    pub net: NetId,
    pub gates: Vec<GateId>,
    /// Series only: the chain in signal order.
    pub chain: Vec<GateId>,
    /// Series/payload only: the host driver moved off `net`.
    pub driver: Option<GateId>,
}

#[derive(Clone, Debug)]
pub struct IntrudedCircuit {
    pub base: Circuit,
    pub applied: Vec<AppliedIntrusion>,
    pub circuit: Circuit,
    /// C_int per host net (F).
    pub c_int: BTreeMap<NetId, f64>,
    /// Host net each gate's contribution is charged to.
    pub attribution: Vec<NetId>,
}

impl IntrudedCircuit {
    /// Target nets in application order.
    pub fn targets(&self) -> Vec<NetId> {
        self.applied.iter().map(|a| a.net).collect()
    }

    /// Clean path (gates of the base circuit) as it runs in the intruded
    /// circuit, with series chains spliced in.
    pub fn map_path(&self, gates: &[GateId], source: NetId) -> Vec<GateId> {
        let mut out = Vec::with_capacity(gates.len());
        for a in &self.applied {
            if !a.chain.is_empty() && a.net == source && a.driver.is_none_or(|d| !gates.contains(&d))
            {
                out.extend_from_slice(&a.chain);
            }
        }
        for &g in gates {
            out.push(g);
            for a in &self.applied {
                if a.driver == Some(g) {
                    out.extend_from_slice(&a.chain);
                }
            }
        }
        out
    }
}

/// Location class of every net under nominal delays.
pub fn nominal_classes(
    c: &Circuit,
    params: &TechnologyParams,
    opts: &ModelOptions,
) -> Result<BTreeMap<NetId, LocationClass>, IntrusionError> {
    let m = CircuitModel::new(c, params, opts)?;
    Ok(classify_locations(c, &m.gate_delays()))
}

/// Net a spec lands on, from a seeded pick among candidates of its class.
pub fn resolve_target(
    c: &Circuit,
    spec: &IntrusionSpec,
    classes: &BTreeMap<NetId, LocationClass>,
) -> Result<NetId, IntrusionError> {
    let net = match &spec.target {
        Target::Net(n) => c
            .net_by_name(n)
            .ok_or_else(|| IntrusionError::UnknownNet(n.clone()))?,
        Target::Class(cl) => {
            let cands: Vec<NetId> = classes
                .iter()
                .filter(|(n, k)| {
                    *k == cl
                        && !(spec.mode == IntrusionMode::Series && c.is_primary_input(**n))
                        && c.driver_gate(**n).is_none_or(|g| !g.foreign)
                })
                .map(|(n, _)| *n)
                .collect();
            if cands.is_empty() {
                return Err(IntrusionError::NoCandidate(*cl));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            cands[rng.random_range(0..cands.len())]
        }
    };
    if spec.mode == IntrusionMode::Series && c.is_primary_input(net) {
        return Err(IntrusionError::SeriesOnInput(c.net(net).name.clone()));
    }
    Ok(net)
}

fn inverter(
    b: &mut crate::netlist::CircuitBuilder,
    kind: CellKind,
    input: NetId,
    output: NetId,
) -> Result<GateId, NetlistError> {
    match kind {
        CellKind::Not => b.foreign_gate(GateKind::Not, &[input], output),
        k => b.foreign_gate(k.gate_kind(), &[input, input], output),
    }
}

/// Applies every spec to `base`. Class targets are resolved on the base
/// circuit under nominal delays.
pub fn inject_all(
    base: &Circuit,
    specs: &[IntrusionSpec],
    params: &TechnologyParams,
    opts: &ModelOptions,
) -> Result<IntrudedCircuit, IntrusionError> {
    if !base.is_decomposed() {
        return Err(IntrusionError::NotDecomposed);
    }
    let needs_classes = specs.iter().any(|s| matches!(s.target, Target::Class(_)));
    let classes = if needs_classes {
        nominal_classes(base, params, opts)?
    } else {
        BTreeMap::new()
    };
    let mut b = base.to_builder();
    let mut applied = Vec::new();
    let mut foreign_owner: Vec<(GateId, NetId)> = Vec::new();
    let mut attach_nets: BTreeMap<NetId, Vec<NetId>> = BTreeMap::new();
    for spec in specs {
        if spec.size == 0 {
            return Err(IntrusionError::ZeroSize);
        }
        if spec.mode == IntrusionMode::Series && spec.size % 2 == 1 {
            return Err(IntrusionError::OddSeriesSize(spec.size));
        }
        let net = resolve_target(base, spec, &classes)?;
        let name = base.net(net).name.clone();
        let trigger = if spec.payload || spec.attach == Attachment::Single {
            let t = match &spec.trigger {
                Some(t) => base
                    .net_by_name(t)
                    .ok_or_else(|| IntrusionError::UnknownNet(t.clone()))?,
                None => *base.primary_inputs().first().ok_or(IntrusionError::NoTrigger)?,
            };
            Some(t)
        } else {
            None
        };
        let mut gates = Vec::new();
        let mut chain = Vec::new();
        let mut driver = None;
        match spec.mode {
            IntrusionMode::Parallel => {
                for k in 0..spec.size {
                    let out = b.fresh_net(&format!("{name}_tj{k}"));
                    let g = match (spec.kind, spec.attach) {
                        (CellKind::Not, _) => b.foreign_gate(GateKind::Not, &[net], out)?,
                        (kind, Attachment::Both) => {
                            b.foreign_gate(kind.gate_kind(), &[net, net], out)?
                        }
                        (kind, Attachment::Single) => b.foreign_gate(
                            kind.gate_kind(),
                            &[net, trigger.expect("resolved")],
                            out,
                        )?,
                    };
                    gates.push(g);
                }
                attach_nets.entry(net).or_default().push(net);
            }
            IntrusionMode::Series => {
                let pre = b.fresh_net(&format!("{name}_pre"));
                let d = b.redirect_driver(net, pre).ok_or_else(|| {
                    IntrusionError::SeriesOnInput(name.clone())
                })?;
                driver = Some(d);
                let mut cur = pre;
                for k in 0..spec.size {
                    let out = if k + 1 == spec.size {
                        net
                    } else {
                        b.fresh_net(&format!("{name}_tj{k}"))
                    };
                    let g = inverter(&mut b, spec.kind, cur, out)?;
                    gates.push(g);
                    chain.push(g);
                    cur = out;
                }
                attach_nets.entry(net).or_default().push(pre);
            }
        }
        if spec.payload {
            let t = trigger.expect("resolved");
            let pre = b.fresh_net(&format!("{name}_pl"));
            let d = b
                .redirect_driver(net, pre)
                .ok_or_else(|| IntrusionError::UnknownNet(name.clone()))?;
            if driver.is_none() {
                driver = Some(d);
            }
            let x = b.fresh_net(&format!("{name}_pl_x"));
            let y = b.fresh_net(&format!("{name}_pl_y"));
            let z = b.fresh_net(&format!("{name}_pl_z"));
            gates.push(b.foreign_gate(GateKind::Nand, &[pre, t], x)?);
            gates.push(b.foreign_gate(GateKind::Nand, &[pre, x], y)?);
            gates.push(b.foreign_gate(GateKind::Nand, &[t, x], z)?);
            gates.push(b.foreign_gate(GateKind::Nand, &[y, z], net)?);
            attach_nets.entry(net).or_default().push(pre);
        }
        foreign_owner.extend(gates.iter().map(|&g| (g, net)));
        applied.push(AppliedIntrusion {
            spec: spec.clone(),
            net,
            gates,
            chain,
            driver,
        });
    }
    let circuit = b.build()?;
    let mut attribution: Vec<NetId> = base.gates().iter().map(|g| g.output).collect();
    attribution.resize(circuit.gates().len(), NetId(u32::MAX));
    for (g, n) in foreign_owner {
        attribution[g.index()] = n;
    }
    let c_int = attach_nets
        .into_iter()
        .map(|(n, nets)| {
            let mut uniq = nets;
            uniq.sort();
            uniq.dedup();
            let sum = uniq
                .iter()
                .map(|&a| intrusion_load(&circuit, a, params))
                .sum();
            (n, sum)
        })
        .collect();
    Ok(IntrudedCircuit {
        base: base.clone(),
        applied,
        circuit,
        c_int,
        attribution,
    })
}

pub fn inject(
    base: &Circuit,
    spec: &IntrusionSpec,
    params: &TechnologyParams,
    opts: &ModelOptions,
) -> Result<IntrudedCircuit, IntrusionError> {
    inject_all(base, std::slice::from_ref(spec), params, opts)
}

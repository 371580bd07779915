// SPDX-License-Identifier: Apache-2.0

//! Gate-level dynamic power, subthreshold leakage and Elmore delay.
//!
//! Input states of two-input cells are encoded as `a<<1 | b`, so `0b01`
//! means first input low, second high. An inverter uses `0` or `1`.

mod bounds;

pub use bounds::{
    circuit_bounds, profile_csv, switching_activity, BoundEnvelope, GateMetrics,
    SideChannelProfile, StateRestriction,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{CellKind, Circuit, Gate, GateKind, NetId};
use crate::techmodel::{load_capacitance, Polarity, TechError, TechnologyParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SideChannelError {
    #[error(transparent)]
    Tech(#[from] TechError),
    #[error("{cell} takes {expected} input bit(s), got {got}")]
    Arity {
        cell: CellKind,
        expected: usize,
        got: usize,
    },
    #[error("gate {0} is not decomposed into NAND2/NOR2/NOT/DFF")]
    NotDecomposed(String),
    #[error("sample set is empty")]
    EmptySamples,
    #[error("trace needs at least 2 vectors, got {0}")]
    ShortTrace(usize),
}

/// Capacitances outside the host netlist.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Added to every primary-output net.
    pub output_pad: f64,
    /// Load seen by a net with no sinks (dangling intruded outputs).
    pub open_sink: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            output_pad: 0.0,
            open_sink: 0.0,
        }
    }
}

/// P = α·C·V_dd²·f.
pub fn dynamic_power(alpha: f64, c_total: f64, params: &TechnologyParams) -> f64 {
    alpha * c_total * params.v_dd * params.v_dd * params.f
}

fn state_index(cell: CellKind, bits: &[bool]) -> Result<usize, SideChannelError> {
    if bits.len() != cell.arity() {
        return Err(SideChannelError::Arity {
            cell,
            expected: cell.arity(),
            got: bits.len(),
        });
    }
    Ok(bits.iter().fold(0usize, |a, &b| (a << 1) | b as usize))
}

/// Leakage power for every input state (unused entries of a NOT are 0).
pub fn leakage_table(cell: CellKind, params: &TechnologyParams, fo: f64) -> [f64; 4] {
    let kn = params.leakage_term(Polarity::N);
    let kp = params.leakage_term(Polarity::P);
    let sn = params.stack_factor(Polarity::N);
    let sp = params.stack_factor(Polarity::P);
    let v = fo * params.v_dd;
    match cell {
        CellKind::Nand2 => [
            2.0 * v * kn * sn,
            2.0 * v * (kn + kp),
            2.0 * v * (kn + kp),
            4.0 * v * kp,
        ],
        CellKind::Nor2 => [
            4.0 * v * kn,
            2.0 * v * (kn + kp),
            2.0 * v * (kn + kp),
            2.0 * v * kp * sp,
        ],
        CellKind::Not => [2.0 * v * kn, 2.0 * v * kp, 0.0, 0.0],
    }
}

pub fn leakage_power(
    cell: CellKind,
    inputs: &[bool],
    params: &TechnologyParams,
    fo: f64,
) -> Result<f64, SideChannelError> {
    Ok(leakage_table(cell, params, fo)[state_index(cell, inputs)?])
}

/// Elmore time constants τ for every `[from][to]` input-state pair;
/// transitions that leave the output unchanged are 0.
pub fn elmore_table(
    cell: CellKind,
    c_total: f64,
    params: &TechnologyParams,
    fo: f64,
) -> Result<[[f64; 4]; 4], SideChannelError> {
    let rn = params.on_resistance(Polarity::N, 1.0)?;
    let rp = params.on_resistance(Polarity::P, 1.0)?;
    let (wn, wp) = (params.wr_n, params.wr_p);
    let cs = params.c_nstack;
    let c = c_total;
    let mut t = [[0.0; 4]; 4];
    match cell {
        CellKind::Nand2 => {
            t[0b01][0b11] = 2.0 * rn * c / (fo * wn);
            t[0b10][0b11] = 2.0 * rn * (c + cs) / (fo * wn);
            t[0b00][0b11] = 2.0 * rn * c / (fo * wn);
            t[0b11][0b01] = rp * c / (fo * wp);
            t[0b11][0b00] = rp * c / (2.0 * fo * wp);
            t[0b11][0b10] = rp * (c + cs) / (fo * wp);
        }
        CellKind::Nor2 => {
            t[0b10][0b00] = 2.0 * rp * c / (fo * wp);
            t[0b01][0b00] = 2.0 * rp * (c + cs) / (fo * wp);
            t[0b11][0b00] = 2.0 * rp * c / (fo * wp);
            t[0b00][0b10] = rn * c / (fo * wn);
            t[0b00][0b11] = rn * c / (2.0 * fo * wn);
            t[0b00][0b01] = rn * (c + cs) / (fo * wn);
        }
        CellKind::Not => {
            t[0][1] = rn * c / (fo * wn);
            t[1][0] = rp * c / (fo * wp);
        }
    }
    Ok(t)
}

/// τ for one transition.
pub fn elmore_tau(
    cell: CellKind,
    from: &[bool],
    to: &[bool],
    c_total: f64,
    params: &TechnologyParams,
    fo: f64,
) -> Result<f64, SideChannelError> {
    let (a, b) = (state_index(cell, from)?, state_index(cell, to)?);
    Ok(elmore_table(cell, c_total, params, fo)?[a][b])
}

/// t = ln2·τ.
pub fn elmore_delay(
    cell: CellKind,
    from: &[bool],
    to: &[bool],
    c_total: f64,
    params: &TechnologyParams,
    fo: f64,
) -> Result<f64, SideChannelError> {
    Ok(std::f64::consts::LN_2 * elmore_tau(cell, from, to, c_total, params, fo)?)
}

/// Host load of a net: sinks that are not intruded gates, plus pad or
/// open-sink capacitance.
pub fn host_load(c: &Circuit, net: NetId, params: &TechnologyParams, opts: &ModelOptions) -> f64 {
    let n = c.net(net);
    let pad = if c.is_primary_output(net) {
        opts.output_pad
    } else if n.sinks.is_empty() {
        opts.open_sink
    } else {
        0.0
    };
    load_capacitance(c, net, params, 0.0) + pad
}

/// C_int: pin capacitance of intruded gates attached to a net.
pub fn intrusion_load(c: &Circuit, net: NetId, params: &TechnologyParams) -> f64 {
    let pin = params.pin_capacitance();
    c.net(net)
        .sinks
        .iter()
        .filter(|p| c.gate(p.gate).foreign)
        .count() as f64
        * pin
}

/// C_total = C_load + C_diff + intrusion_load.
pub fn total_capacitance(
    c: &Circuit,
    gate: &Gate,
    params: &TechnologyParams,
    opts: &ModelOptions,
    intrusion_load: f64,
) -> f64 {
    let fo = gate.fanout_count as f64;
    // A flip-flop's output stage is a NAND2 of its latch.
    let cell = gate.cell().unwrap_or(CellKind::Nand2);
    host_load(c, gate.output, params, opts) + params.diffusion_capacitance(cell, fo) + intrusion_load
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    Cell(CellKind),
    Dff,
}

/// Precomputed side-channel coefficients of one gate under one parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateModel {
    pub kind: ModelKind,
    pub c_total: f64,
    /// Dynamic power at α = 1.
    pub dp_coeff: f64,
    /// Leakage per input state. A flip-flop is indexed by `D<<1 | Q`.
    pub leak: [f64; 4],
    /// Delay (`ln2·τ`) per `[from][to]` input state.
    pub delay: [[f64; 4]; 4],
    /// Input states the gate can take given its wiring (tied inputs).
    pub feasible: u8,
}

impl GateModel {
    pub fn max_delay(&self) -> f64 {
        self.delay.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    pub fn max_delay_within(&self, states: u8) -> f64 {
        let mut m: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                if states >> a & 1 == 1 && states >> b & 1 == 1 {
                    m = m.max(self.delay[a][b]);
                }
            }
        }
        m
    }

    pub fn leak_range(&self, states: u8) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for s in 0..4 {
            if states >> s & 1 == 1 {
                lo = lo.min(self.leak[s]);
                hi = hi.max(self.leak[s]);
            }
        }
        if lo.is_infinite() {
            lo = 0.0;
        }
        (lo, hi)
    }
}

/// Leakage of a flip-flop's latch in the hold phase, per `(D, Q)`.
fn dff_leakage(params: &TechnologyParams, fo: f64) -> [f64; 4] {
    let inv = leakage_table(CellKind::Not, params, 1.0);
    let nand1 = leakage_table(CellKind::Nand2, params, 1.0);
    let nand_q = leakage_table(CellKind::Nand2, params, fo);
    let mut out = [0.0; 4];
    for d in 0..2usize {
        for q in 0..2usize {
            // Clock low: both input NANDs see (x, 0); the storage pair sees
            // (1, !Q) and (1, Q).
            out[d << 1 | q] = inv[d]
                + nand1[d << 1]
                + nand1[(1 - d) << 1]
                + nand_q[0b10 | (1 - q)]
                + nand1[0b10 | q];
        }
    }
    out
}

fn feasible_states(g: &Gate) -> u8 {
    match g.cell() {
        Some(CellKind::Not) => 0b0011,
        Some(_) if g.inputs[0] == g.inputs[1] => 0b1001,
        Some(_) => 0b1111,
        None => 0b1111,
    }
}

pub fn gate_model(
    c: &Circuit,
    g: &Gate,
    params: &TechnologyParams,
    opts: &ModelOptions,
) -> Result<GateModel, SideChannelError> {
    let fo = g.fanout_count as f64;
    let c_int = intrusion_load(c, g.output, params);
    let c_total = total_capacitance(c, g, params, opts, c_int);
    let dp_coeff = dynamic_power(1.0, c_total, params);
    if g.kind == GateKind::Dff {
        return Ok(GateModel {
            kind: ModelKind::Dff,
            c_total,
            dp_coeff,
            leak: dff_leakage(params, fo),
            delay: [[0.0; 4]; 4],
            feasible: 0b1111,
        });
    }
    let cell = g
        .cell()
        .ok_or_else(|| SideChannelError::NotDecomposed(c.net(g.output).name.clone()))?;
    let tau = elmore_table(cell, c_total, params, fo)?;
    let mut delay = [[0.0; 4]; 4];
    for (d, t) in delay.iter_mut().flatten().zip(tau.iter().flatten()) {
        *d = std::f64::consts::LN_2 * t;
    }
    Ok(GateModel {
        kind: ModelKind::Cell(cell),
        c_total,
        dp_coeff,
        leak: leakage_table(cell, params, fo),
        delay,
        feasible: feasible_states(g),
    })
}

/// Per-gate models of a whole circuit under one parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitModel {
    pub gates: Vec<GateModel>,
}

impl CircuitModel {
    pub fn new(
        c: &Circuit,
        params: &TechnologyParams,
        opts: &ModelOptions,
    ) -> Result<Self, SideChannelError> {
        let gates = c
            .gates()
            .iter()
            .map(|g| gate_model(c, g, params, opts))
            .collect::<Result<_, _>>()?;
        Ok(CircuitModel { gates })
    }

    /// Worst-case dynamic power, α = 1 everywhere.
    pub fn dp_static(&self) -> f64 {
        self.gates.iter().map(|g| g.dp_coeff).sum()
    }

    /// Σ per-gate maximum leakage over feasible states.
    pub fn lp_max_static(&self) -> f64 {
        self.gates.iter().map(|g| g.leak_range(g.feasible).1).sum()
    }

    pub fn lp_min_static(&self) -> f64 {
        self.gates.iter().map(|g| g.leak_range(g.feasible).0).sum()
    }

    /// Per-gate worst delay over feasible transitions; 0 for flip-flops.
    pub fn gate_delays(&self) -> Vec<f64> {
        self.gates
            .iter()
            .map(|g| g.max_delay_within(g.feasible))
            .collect()
    }
}

/// Input state of a gate under settled net values.
pub fn input_state(g: &Gate, values: &[bool]) -> usize {
    if g.is_dff() {
        return (values[g.inputs[0].index()] as usize) << 1 | values[g.output.index()] as usize;
    }
    g.inputs
        .iter()
        .fold(0usize, |a, n| (a << 1) | values[n.index()] as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
    }

    #[test]
    fn nand_leak_symmetry() {
        let p = TechnologyParams::nominal_45nm();
        let t = leakage_table(CellKind::Nand2, &p, 2.0);
        assert_eq!(t[1], t[2]);
        assert_ne!(t[0], t[3]);
        assert!(t.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn not_delays_are_single_stage_rc() {
        let p = TechnologyParams::nominal_45nm();
        let c = 1e-15;
        let rise = elmore_delay(CellKind::Not, &[false], &[true], c, &p, 1.0).unwrap();
        let rn = p.on_resistance(Polarity::N, p.wr_n).unwrap();
        assert!(close(rise, std::f64::consts::LN_2 * rn * c));
        let fall = elmore_delay(CellKind::Not, &[true], &[false], c, &p, 1.0).unwrap();
        let rp = p.on_resistance(Polarity::P, p.wr_p).unwrap();
        assert!(close(fall, std::f64::consts::LN_2 * rp * c));
    }

    #[test]
    fn arity_is_checked() {
        let p = TechnologyParams::nominal_45nm();
        assert!(matches!(
            leakage_power(CellKind::Nand2, &[true], &p, 1.0),
            Err(SideChannelError::Arity { .. })
        ));
    }

    #[test]
    fn dp_scaling() {
        let p = TechnologyParams::nominal_45nm();
        assert_eq!(dynamic_power(0.0, 1e-15, &p), 0.0);
        let mut q = p.clone();
        q.v_dd *= 2.0;
        assert!(close(dynamic_power(0.5, 1e-15, &q), 4.0 * dynamic_power(0.5, 1e-15, &p)));
    }

    #[test]
    fn non_switching_transitions_are_zero() {
        let p = TechnologyParams::nominal_45nm();
        for cell in [CellKind::Nand2, CellKind::Nor2] {
            let t = elmore_table(cell, 1e-15, &p, 1.0).unwrap();
            for a in 0..4u8 {
                for b in 0..4u8 {
                    let changes = cell.output(a) != cell.output(b);
                    assert_eq!(t[a as usize][b as usize] > 0.0, changes, "{cell} {a:02b}->{b:02b}");
                }
            }
        }
    }
}

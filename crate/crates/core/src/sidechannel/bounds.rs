// SPDX-License-Identifier: Apache-2.0

//! Envelopes over parameter samples, switching activity and profiles.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{input_state, CircuitModel, ModelKind, ModelOptions, SideChannelError};
use crate::netlist::{Circuit, Evaluator, GateId, PathDescriptor};
use crate::techmodel::TechnologyParams;

/// Input states and transitions each gate was observed in. Used to tighten
/// leakage and delay bounds to reachable behaviour.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRestriction {
    pub states: Vec<u8>,
    /// Bit `from*4 + to`.
    pub transitions: Vec<u16>,
}

impl StateRestriction {
    pub fn empty(c: &Circuit) -> Self {
        StateRestriction {
            states: vec![0; c.gates().len()],
            transitions: vec![0; c.gates().len()],
        }
    }

    /// Records the settled values of one cycle and, if given, the change
    /// from the previous cycle.
    pub fn observe(&mut self, c: &Circuit, prev: Option<&[bool]>, cur: &[bool]) {
        for g in c.gates() {
            let s = input_state(g, cur);
            self.states[g.id.index()] |= 1 << s;
            if let Some(p) = prev {
                let from = input_state(g, p);
                self.transitions[g.id.index()] |= 1 << (from * 4 + s);
            }
        }
    }

    pub fn merge(&mut self, other: &StateRestriction) {
        for (a, b) in self.states.iter_mut().zip(&other.states) {
            *a |= b;
        }
        for (a, b) in self.transitions.iter_mut().zip(&other.transitions) {
            *a |= b;
        }
    }
}

/// Upper and lower bounds over a set of parameter samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEnvelope {
    pub dp_max: f64,
    pub lp_max: f64,
    pub lp_min: f64,
    /// D_max(k) for each path passed in.
    pub path_delay_max: Vec<f64>,
    pub gate_dp_max: Vec<f64>,
    pub gate_lp_max: Vec<f64>,
    pub gate_lp_min: Vec<f64>,
    pub gate_delay_max: Vec<f64>,
    pub sample_count: usize,
}

impl BoundEnvelope {
    /// Dynamic power and delay are bounded below by zero.
    pub const DP_MIN: f64 = 0.0;
    pub const DELAY_MIN: f64 = 0.0;

    pub fn from_models(
        models: &[CircuitModel],
        paths: &[PathDescriptor],
        restriction: Option<&StateRestriction>,
    ) -> Result<Self, SideChannelError> {
        let first = models.first().ok_or(SideChannelError::EmptySamples)?;
        let n = first.gates.len();
        let mut dp = vec![0.0f64; n];
        let mut lp_hi = vec![0.0f64; n];
        let mut lp_lo = vec![f64::INFINITY; n];
        let mut dl = vec![0.0f64; n];
        for m in models {
            for (i, g) in m.gates.iter().enumerate() {
                let states = restriction.map_or(g.feasible, |r| r.states[i] & g.feasible);
                let (lo, hi) = g.leak_range(states);
                dp[i] = dp[i].max(g.dp_coeff);
                lp_hi[i] = lp_hi[i].max(hi);
                lp_lo[i] = lp_lo[i].min(lo);
                let d = match restriction {
                    None => g.max_delay_within(g.feasible),
                    Some(r) => {
                        let mut best: f64 = 0.0;
                        for t in 0..16 {
                            if r.transitions[i] >> t & 1 == 1 {
                                best = best.max(g.delay[t / 4][t % 4]);
                            }
                        }
                        best
                    }
                };
                dl[i] = dl[i].max(d);
            }
        }
        for v in &mut lp_lo {
            if v.is_infinite() {
                *v = 0.0;
            }
        }
        let path_delay_max = paths
            .iter()
            .map(|p| p.gates.iter().map(|g| dl[g.index()]).sum())
            .collect();
        Ok(BoundEnvelope {
            dp_max: dp.iter().sum(),
            lp_max: lp_hi.iter().sum(),
            lp_min: lp_lo.iter().sum(),
            path_delay_max,
            gate_dp_max: dp,
            gate_lp_max: lp_hi,
            gate_lp_min: lp_lo,
            gate_delay_max: dl,
            sample_count: models.len(),
        })
    }
}

/// Envelope of `c` over `samples`; models are built in parallel and reduced
/// with order-independent max/min.
pub fn circuit_bounds(
    c: &Circuit,
    samples: &[TechnologyParams],
    opts: &ModelOptions,
    paths: &[PathDescriptor],
    restriction: Option<&StateRestriction>,
) -> Result<BoundEnvelope, SideChannelError> {
    if samples.is_empty() {
        return Err(SideChannelError::EmptySamples);
    }
    let models: Vec<CircuitModel> = samples
        .par_iter()
        .map(|p| CircuitModel::new(c, p, opts))
        .collect::<Result<_, _>>()?;
    BoundEnvelope::from_models(&models, paths, restriction)
}

/// α per gate: output toggles / (trace length − 1) under cycle-accurate
/// zero-delay simulation from `initial_state`.
pub fn switching_activity(
    c: &Circuit,
    trace: &[Vec<bool>],
    initial_state: &[bool],
) -> Result<Vec<f64>, SideChannelError> {
    if trace.len() < 2 {
        return Err(SideChannelError::ShortTrace(trace.len()));
    }
    let ev = Evaluator::new(c);
    let mut state = initial_state.to_vec();
    let mut prev: Option<Vec<bool>> = None;
    let mut toggles = vec![0u64; c.gates().len()];
    for inputs in trace {
        let v = ev.settle_fresh(inputs, &state);
        if let Some(p) = &prev {
            for g in c.gates() {
                let o = g.output.index();
                if p[o] != v[o] {
                    toggles[g.id.index()] += 1;
                }
            }
        }
        state = ev.next_state(&v);
        prev = Some(v);
    }
    let steps = (trace.len() - 1) as f64;
    Ok(toggles.into_iter().map(|t| t as f64 / steps).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateMetrics {
    pub gate: GateId,
    pub kind: ModelKind,
    pub dynamic_power: f64,
    pub leakage_power: f64,
    pub delay: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideChannelProfile {
    pub gates: Vec<GateMetrics>,
    pub dynamic_power: f64,
    pub leakage_power: f64,
    pub path_delays: Vec<f64>,
}

impl SideChannelProfile {
    /// Per-gate metrics at activity `alpha`. Leakage is taken at `values`
    /// when given, otherwise at the worst feasible state; delay is the worst
    /// feasible transition.
    pub fn new(
        c: &Circuit,
        model: &CircuitModel,
        alpha: &[f64],
        values: Option<&[bool]>,
        paths: &[PathDescriptor],
    ) -> Self {
        let gates: Vec<GateMetrics> = c
            .gates()
            .iter()
            .zip(&model.gates)
            .map(|(g, m)| GateMetrics {
                gate: g.id,
                kind: m.kind,
                dynamic_power: alpha[g.id.index()] * m.dp_coeff,
                leakage_power: match values {
                    Some(v) => m.leak[input_state(g, v)],
                    None => m.leak_range(m.feasible).1,
                },
                delay: m.max_delay_within(m.feasible),
            })
            .collect();
        let path_delays = paths
            .iter()
            .map(|p| p.gates.iter().map(|g| gates[g.index()].delay).sum())
            .collect();
        SideChannelProfile {
            dynamic_power: gates.iter().map(|g| g.dynamic_power).sum(),
            leakage_power: gates.iter().map(|g| g.leakage_power).sum(),
            gates,
            path_delays,
        }
    }
}

fn kind_name(k: ModelKind) -> &'static str {
    match k {
        ModelKind::Cell(c) => c.name(),
        ModelKind::Dff => "DFF",
    }
}

/// One row per gate input state (dynamic power at α = 1 and leakage) and
/// one per output-changing transition (delay). SI units, 9 significant
/// digits.
pub fn profile_csv(c: &Circuit, model: &CircuitModel) -> String {
    let mut s = String::from("gate,net,kind,state,dp_w,lp_w,delay_s\n");
    for (g, m) in c.gates().iter().zip(&model.gates) {
        let net = &c.net(g.output).name;
        let kind = kind_name(m.kind);
        let width = if matches!(m.kind, ModelKind::Cell(crate::netlist::CellKind::Not)) {
            1
        } else {
            2
        };
        let states = if width == 1 { 2 } else { 4 };
        for st in 0..states {
            if m.feasible >> st & 1 == 0 {
                continue;
            }
            let _ = writeln!(
                s,
                "{},{net},{kind},{:0w$b},{:.8e},{:.8e},",
                g.id.0,
                st,
                m.dp_coeff,
                m.leak[st],
                w = width
            );
        }
        for a in 0..states {
            for b in 0..states {
                if m.delay[a][b] > 0.0 {
                    let _ = writeln!(
                        s,
                        "{},{net},{kind},{:0w$b}->{:0w$b},,,{:.8e}",
                        g.id.0,
                        a,
                        b,
                        m.delay[a][b],
                        w = width
                    );
                }
            }
        }
    }
    s
}

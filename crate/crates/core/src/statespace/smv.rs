// SPDX-License-Identifier: Apache-2.0

//! SMV rendering of a transition system for external cross-checking.
//!
//! Primary inputs are `IVAR`s, flip-flops and latch cuts are state
//! variables and every gate output is a `DEFINE`. Copies of the previous
//! cycle's net values (`p_*`) let dynamic power and delay be written as
//! case expressions over toggles and input-state transitions. `started` is
//! false on the reset step, which has no predecessor and is not labelled.

use std::fmt::Write as _;

use super::TransitionSystem;
use crate::netlist::{CellKind, Circuit, NetId};
use crate::sidechannel::{BoundEnvelope, ModelKind};

fn ident(c: &Circuit, n: NetId) -> String {
    let name: String = c
        .net(n)
        .name
        .chars()
        .map(|ch| if ch.is_ascii_alphanumeric() { ch } else { '_' })
        .collect();
    format!("n{}_{name}", n.0)
}

fn real(x: f64) -> String {
    format!("{x:.9e}")
}

/// Input state of a gate as an SMV integer expression over `prefix`ed
/// net identifiers.
fn state_expr(c: &Circuit, gate: &crate::netlist::Gate, prefix: &str) -> String {
    let bit = |n: NetId| format!("toint({prefix}{})", ident(c, n));
    match gate.inputs.len() {
        1 if !gate.is_dff() => bit(gate.inputs[0]),
        _ if gate.is_dff() => format!("2 * {} + {}", bit(gate.inputs[0]), bit(gate.output)),
        _ => format!("2 * {} + {}", bit(gate.inputs[0]), bit(gate.inputs[1])),
    }
}

/// SMV model of `sys`. When `env` is given, the bound properties are
/// appended as LTL specifications.
pub fn export_smv(sys: &TransitionSystem, env: Option<&BoundEnvelope>) -> String {
    let c = sys.circuit();
    let model = sys.model();
    let mut s = String::new();
    let _ = writeln!(s, "-- circuit {}", c.name());
    s.push_str("MODULE main\n");
    if !c.primary_inputs().is_empty() {
        s.push_str("IVAR\n");
        for &pi in c.primary_inputs() {
            let _ = writeln!(s, "  {} : boolean;", ident(c, pi));
        }
    }
    s.push_str("VAR\n  started : boolean;\n");
    let layout = sys.layout();
    let state_nets: Vec<NetId> = layout
        .flipflops
        .iter()
        .map(|&g| c.gate(g).output)
        .chain(layout.cuts.iter().copied())
        .collect();
    for &n in &state_nets {
        let _ = writeln!(s, "  {} : boolean;", ident(c, n));
    }
    for n in c.nets() {
        let _ = writeln!(s, "  p_{} : boolean;", ident(c, n.id));
    }
    s.push_str("DEFINE\n");
    for &g in c.comb_order() {
        let gate = c.gate(g);
        let out = ident(c, gate.output);
        if layout.cuts.contains(&gate.output) {
            continue;
        }
        let a = ident(c, gate.inputs[0]);
        let expr = match gate.cell() {
            Some(CellKind::Nand2) => format!("!({a} & {})", ident(c, gate.inputs[1])),
            Some(CellKind::Nor2) => format!("!({a} | {})", ident(c, gate.inputs[1])),
            _ => format!("!{a}"),
        };
        let _ = writeln!(s, "  {out} := {expr};");
    }
    let mut dp_terms = Vec::new();
    let mut lp_terms = Vec::new();
    for (gate, m) in c.gates().iter().zip(&model.gates) {
        let o = ident(c, gate.output);
        dp_terms.push(format!("({o} != p_{o} ? {} : 0.0)", real(m.dp_coeff)));
        let states = if matches!(m.kind, ModelKind::Cell(CellKind::Not)) { 2 } else { 4 };
        let cur = state_expr(c, gate, "");
        let arms: Vec<String> = (0..states)
            .map(|st| format!("{cur} = {st} : {};", real(m.leak[st])))
            .collect();
        lp_terms.push(format!("case {} TRUE : 0.0; esac", arms.join(" ")));
    }
    let _ = writeln!(s, "  dp := {};", join_sum(&dp_terms));
    let _ = writeln!(s, "  lp := {};", join_sum(&lp_terms));
    for (k, p) in sys.paths().iter().enumerate() {
        let mut terms = Vec::new();
        for &g in p {
            let gate = c.gate(g);
            let m = &model.gates[g.index()];
            let prev = state_expr(c, gate, "p_");
            let cur = state_expr(c, gate, "");
            let mut arms = Vec::new();
            for (a, row) in m.delay.iter().enumerate() {
                for (b, &d) in row.iter().enumerate() {
                    if d > 0.0 {
                        arms.push(format!("{prev} = {a} & {cur} = {b} : {};", real(d)));
                    }
                }
            }
            terms.push(format!("case {} TRUE : 0.0; esac", arms.join(" ")));
        }
        let _ = writeln!(s, "  d{k} := {};", join_sum(&terms));
    }
    s.push_str("ASSIGN\n  init(started) := FALSE;\n  next(started) := TRUE;\n");
    let reset = sys.reset_state();
    for (i, &n) in state_nets.iter().enumerate() {
        let id = ident(c, n);
        let _ = writeln!(s, "  init({id}) := {};", if reset.get(i) { "TRUE" } else { "FALSE" });
        let next = if i < layout.flipflops.len() {
            ident(c, c.gate(layout.flipflops[i]).inputs[0])
        } else {
            let g = c.driver_gate(n).expect("cut is driven");
            let a = ident(c, g.inputs[0]);
            match g.cell() {
                Some(CellKind::Nand2) => format!("!({a} & {})", ident(c, g.inputs[1])),
                Some(CellKind::Nor2) => format!("!({a} | {})", ident(c, g.inputs[1])),
                _ => format!("!{a}"),
            }
        };
        let _ = writeln!(s, "  next({id}) := {next};");
    }
    for n in c.nets() {
        let id = ident(c, n.id);
        let _ = writeln!(s, "  init(p_{id}) := FALSE;");
        let _ = writeln!(s, "  next(p_{id}) := {id};");
    }
    if let Some(env) = env {
        let _ = writeln!(
            s,
            "LTLSPEC NAME dp_upper := G (started & dp != 0.0 -> dp <= {});",
            real(env.dp_max)
        );
        let _ = writeln!(
            s,
            "LTLSPEC NAME lp_upper := G (started -> lp <= {});",
            real(env.lp_max)
        );
        let _ = writeln!(
            s,
            "LTLSPEC NAME lp_lower := G (started -> lp >= {});",
            real(env.lp_min)
        );
        for (k, d) in env.path_delay_max.iter().enumerate().take(sys.paths().len()) {
            let _ = writeln!(
                s,
                "LTLSPEC NAME delay_{k} := G (started & d{k} != 0.0 -> d{k} <= {});",
                real(*d)
            );
        }
    }
    s
}

fn join_sum(terms: &[String]) -> String {
    if terms.is_empty() {
        "0.0".to_string()
    } else {
        terms.join("\n    + ")
    }
}

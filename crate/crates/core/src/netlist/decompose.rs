// SPDX-License-Identifier: Apache-2.0

//! Rewriting into the NAND2 / NOR2 / NOT / DFF basis.
//!
//! Rules (fixed so gate counts are reproducible):
//! - ANDn: balanced NAND2 tree with an inverter on every internal node and a
//!   final NOT; NANDn omits that final NOT.
//! - ORn / NORn: the NOR2 dual.
//! - XOR2: the four-NAND pattern; XORn chains XOR2 left to right; XNOR adds a NOT.
//! - BUF: two NOTs. Single-input AND/OR are buffers, NAND/NOR inverters.
//!
//! Every original net keeps its name and driver position; helper nets are
//! named `<output>_d<k>`.

use super::{Circuit, CircuitBuilder, GateKind, NetId, NetlistError};

pub fn decompose_universal(c: &Circuit) -> Result<Circuit, NetlistError> {
    let mut b = CircuitBuilder::new(c.name());
    b.allow_latch_loops = !c.latch_cuts().is_empty();
    for n in c.nets() {
        b.net(&n.name);
    }
    for &pi in c.primary_inputs() {
        b.input(&c.net(pi).name)?;
    }
    for &po in c.primary_outputs() {
        b.output(&c.net(po).name);
    }
    for g in c.gates() {
        let mut e = Emitter {
            b: &mut b,
            base: c.net(g.output).name.clone(),
            k: 0,
            foreign: g.foreign,
        };
        let ins: Vec<NetId> = g.inputs.clone();
        let out = g.output;
        match g.kind {
            GateKind::Dff => e.emit(GateKind::Dff, &[ins[0]], out)?,
            GateKind::Not => e.emit(GateKind::Not, &ins, out)?,
            GateKind::Buf => e.buffer(ins[0], out)?,
            GateKind::And => e.tree(&ins, out, GateKind::Nand, true)?,
            GateKind::Nand => e.tree(&ins, out, GateKind::Nand, false)?,
            GateKind::Or => e.tree(&ins, out, GateKind::Nor, true)?,
            GateKind::Nor => e.tree(&ins, out, GateKind::Nor, false)?,
            GateKind::Xor => e.xor_chain(&ins, out)?,
            GateKind::Xnor => {
                let t = e.fresh();
                e.xor_chain(&ins, t)?;
                e.emit(GateKind::Not, &[t], out)?;
            }
        }
    }
    b.build()
}

struct Emitter<'a> {
    b: &'a mut CircuitBuilder,
    base: String,
    k: usize,
    foreign: bool,
}

impl Emitter<'_> {
    fn fresh(&mut self) -> NetId {
        self.k += 1;
        let name = format!("{}_d{}", self.base, self.k);
        self.b.fresh_net(&name)
    }

    fn emit(&mut self, kind: GateKind, ins: &[NetId], out: NetId) -> Result<(), NetlistError> {
        if self.foreign {
            self.b.foreign_gate(kind, ins, out)?;
        } else {
            self.b.gate(kind, ins, out)?;
        }
        Ok(())
    }

    fn buffer(&mut self, a: NetId, out: NetId) -> Result<(), NetlistError> {
        let t = self.fresh();
        self.emit(GateKind::Not, &[a], t)?;
        self.emit(GateKind::Not, &[t], out)
    }

    /// Positive (AND/OR) function of `ins` as a fresh net, or the input
    /// itself when there is only one.
    fn positive(&mut self, ins: &[NetId], cell: GateKind) -> Result<NetId, NetlistError> {
        if ins.len() == 1 {
            return Ok(ins[0]);
        }
        let inv = self.fresh();
        self.inverted_into(ins, cell, inv)?;
        let out = self.fresh();
        self.emit(GateKind::Not, &[inv], out)?;
        Ok(out)
    }

    /// NAND/NOR of `ins` (len ≥ 2) driven onto `out`.
    fn inverted_into(
        &mut self,
        ins: &[NetId],
        cell: GateKind,
        out: NetId,
    ) -> Result<(), NetlistError> {
        let mid = ins.len().div_ceil(2);
        let l = self.positive(&ins[..mid], cell)?;
        let r = self.positive(&ins[mid..], cell)?;
        self.emit(cell, &[l, r], out)
    }

    fn tree(
        &mut self,
        ins: &[NetId],
        out: NetId,
        cell: GateKind,
        positive: bool,
    ) -> Result<(), NetlistError> {
        match (ins.len(), positive) {
            (1, true) => self.buffer(ins[0], out),
            (1, false) => self.emit(GateKind::Not, ins, out),
            (_, false) => self.inverted_into(ins, cell, out),
            (_, true) => {
                let t = self.fresh();
                self.inverted_into(ins, cell, t)?;
                self.emit(GateKind::Not, &[t], out)
            }
        }
    }

    fn xor2(&mut self, a: NetId, b: NetId, out: NetId) -> Result<(), NetlistError> {
        let m = self.fresh();
        let p = self.fresh();
        let q = self.fresh();
        self.emit(GateKind::Nand, &[a, b], m)?;
        self.emit(GateKind::Nand, &[a, m], p)?;
        self.emit(GateKind::Nand, &[b, m], q)?;
        self.emit(GateKind::Nand, &[p, q], out)
    }

    fn xor_chain(&mut self, ins: &[NetId], out: NetId) -> Result<(), NetlistError> {
        let mut acc = ins[0];
        for (i, &x) in ins.iter().enumerate().skip(1) {
            let target = if i + 1 == ins.len() { out } else { self.fresh() };
            self.xor2(acc, x, target)?;
            acc = target;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_bench, Evaluator};

    fn truth_table(text: &str, n: usize) -> (Vec<bool>, Vec<bool>, Circuit) {
        let c = parse_bench("t", text).unwrap();
        let d = decompose_universal(&c).unwrap();
        assert!(d.is_decomposed());
        let run = |c: &Circuit| {
            let ev = Evaluator::new(c);
            (0..1u32 << n)
                .map(|row| {
                    let ins: Vec<bool> = (0..n).map(|i| row >> (n - 1 - i) & 1 == 1).collect();
                    let v = ev.settle_fresh(&ins, &[]);
                    v[c.primary_outputs()[0].index()]
                })
                .collect::<Vec<_>>()
        };
        (run(&c), run(&d), d)
    }

    #[test]
    fn and2_is_nand_then_not() {
        let (a, b, d) = truth_table("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n", 2);
        assert_eq!(a, b);
        let kinds: Vec<GateKind> = d.gates().iter().map(|g| g.kind).collect();
        assert_eq!(kinds, vec![GateKind::Nand, GateKind::Not]);
    }

    #[test]
    fn nand3_truth_table() {
        let (a, b, _) =
            truth_table("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\ny = NAND(a, b, c)\n", 3);
        assert_eq!(a, vec![true, true, true, true, true, true, true, false]);
        assert_eq!(a, b);
    }

    #[test]
    fn wide_gates_match() {
        for kind in ["AND", "NAND", "OR", "NOR", "XOR", "XNOR"] {
            for n in 2..=5 {
                let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
                let mut text = String::new();
                for nm in &names {
                    text.push_str(&format!("INPUT({nm})\n"));
                }
                text.push_str(&format!("OUTPUT(y)\ny = {kind}({})\n", names.join(", ")));
                let (a, b, _) = truth_table(&text, n);
                assert_eq!(a, b, "{kind}{n}");
            }
        }
    }

    #[test]
    fn unary_forms() {
        for kind in ["AND", "OR", "NAND", "NOR", "BUFF", "NOT"] {
            let text = format!("INPUT(a)\nOUTPUT(y)\ny = {kind}(a)\n");
            let (a, b, _) = truth_table(&text, 1);
            assert_eq!(a, b, "{kind}");
        }
    }
}

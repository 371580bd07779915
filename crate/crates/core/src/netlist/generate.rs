// SPDX-License-Identifier: Apache-2.0

//! Seeded random sequential circuits with a prescribed gate histogram.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Circuit, CircuitBuilder, GateKind, NetlistError};

#[derive(Clone, Debug)]
pub struct GeneratorSpec {
    pub name: String,
    pub inputs: usize,
    pub outputs: usize,
    pub flipflops: usize,
    /// Combinational gate counts per kind.
    pub gates: Vec<(GateKind, usize)>,
    pub max_fanin: usize,
}

struct Proto {
    kind: GateKind,
    inputs: Vec<usize>,
}

/// Signals are numbered: primary inputs, flip-flop outputs, then gate outputs
/// in creation order. Inputs favour the oldest unused signal (so little logic
/// dangles) and otherwise recent signals (so cones get deep).
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<Circuit, NetlistError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kinds: Vec<GateKind> = spec
        .gates
        .iter()
        .flat_map(|&(k, n)| std::iter::repeat_n(k, n))
        .collect();
    kinds.shuffle(&mut rng);

    let first_gate = spec.inputs + spec.flipflops;
    let total = first_gate + kinds.len();
    let mut used = vec![false; total];
    let mut protos: Vec<Proto> = Vec::with_capacity(kinds.len());
    const WINDOW: usize = 12;

    for (j, &kind) in kinds.iter().enumerate() {
        let avail = first_gate + j;
        let want = match kind {
            GateKind::Not | GateKind::Buf => 1,
            _ => {
                let r: f64 = rng.random();
                let a = if r < 0.6 {
                    2
                } else if r < 0.85 {
                    3
                } else {
                    4
                };
                a.min(spec.max_fanin.max(2))
            }
        };
        let want = want.min(avail).max(1);
        let mut ins: Vec<usize> = Vec::with_capacity(want);
        while ins.len() < want {
            let oldest_unused = (0..avail).find(|&s| !used[s] && !ins.contains(&s));
            let pick = match oldest_unused {
                Some(s) if rng.random_bool(0.5) => s,
                _ => {
                    let lo = avail.saturating_sub(WINDOW);
                    let mut s = rng.random_range(lo..avail);
                    let mut tries = 0;
                    while ins.contains(&s) && tries < 8 {
                        s = rng.random_range(0..avail);
                        tries += 1;
                    }
                    if ins.contains(&s) {
                        match (0..avail).find(|s| !ins.contains(s)) {
                            Some(s) => s,
                            None => break,
                        }
                    } else {
                        s
                    }
                }
            };
            used[pick] = true;
            ins.push(pick);
        }
        let kind = match (kind, ins.len()) {
            (GateKind::Xor | GateKind::Xnor, 1) => GateKind::Buf,
            (k, _) => k,
        };
        protos.push(Proto { kind, inputs: ins });
    }

    // Outputs and flip-flop data pins take the newest unused gate outputs
    // first, then random gate outputs.
    let take = |used: &mut Vec<bool>, rng: &mut ChaCha8Rng, avoid: &[usize]| -> usize {
        if let Some(s) = (first_gate..total)
            .rev()
            .find(|&s| !used[s] && !avoid.contains(&s))
        {
            used[s] = true;
            return s;
        }
        loop {
            let s = rng.random_range(first_gate..total);
            if !avoid.contains(&s) || avoid.len() >= total - first_gate {
                used[s] = true;
                return s;
            }
        }
    };
    let mut pos = Vec::with_capacity(spec.outputs);
    for _ in 0..spec.outputs {
        let s = take(&mut used, &mut rng, &pos);
        pos.push(s);
    }
    let mut dff_d = Vec::with_capacity(spec.flipflops);
    for _ in 0..spec.flipflops {
        let s = take(&mut used, &mut rng, &[]);
        dff_d.push(s);
    }

    // Remaining unused signals become extra inputs of later wide gates.
    // `used` is updated inside the loop.
    #[allow(clippy::needless_range_loop)]
    for s in 0..total {
        if used[s] {
            continue;
        }
        let from = if s < first_gate { 0 } else { s - first_gate + 1 };
        let cands: Vec<usize> = (from..protos.len())
            .filter(|&j| {
                matches!(
                    protos[j].kind,
                    GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor
                ) && !protos[j].inputs.contains(&s)
            })
            .collect();
        if let Some(&j) = cands.choose(&mut rng) {
            protos[j].inputs.push(s);
            used[s] = true;
        }
    }

    let mut b = CircuitBuilder::new(&spec.name);
    let name = |s: usize| format!("G{s}");
    let nets: Vec<_> = (0..total).map(|s| b.net(&name(s))).collect();
    for s in 0..spec.inputs {
        b.input(&name(s))?;
    }
    for &s in &pos {
        b.output(&name(s));
    }
    for (i, &d) in dff_d.iter().enumerate() {
        b.gate(GateKind::Dff, &[nets[d]], nets[spec.inputs + i])?;
    }
    for (j, p) in protos.iter().enumerate() {
        let ins: Vec<_> = p.inputs.iter().map(|&s| nets[s]).collect();
        b.gate(p.kind, &ins, nets[first_gate + j])?;
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GeneratorSpec {
        GeneratorSpec {
            name: "r".into(),
            inputs: 3,
            outputs: 2,
            flipflops: 2,
            gates: vec![(GateKind::Not, 6), (GateKind::And, 5), (GateKind::Nor, 5), (GateKind::Xor, 4)],
            max_fanin: 3,
        }
    }

    #[test]
    fn shape_and_histogram() {
        let c = generate(&spec(), 1).unwrap();
        assert_eq!(c.primary_inputs().len(), 3);
        assert_eq!(c.primary_outputs().len(), 2);
        assert_eq!(c.flipflops().len(), 2);
        let h = c.histogram();
        assert_eq!(h[&GateKind::Not], 6);
        assert_eq!(h[&GateKind::And], 5);
        assert_eq!(h[&GateKind::Xor], 4);
    }

    #[test]
    fn deterministic() {
        let a = crate::netlist::write_bench(&generate(&spec(), 9).unwrap());
        let b = crate::netlist::write_bench(&generate(&spec(), 9).unwrap());
        assert_eq!(a, b);
    }
}

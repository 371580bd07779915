// SPDX-License-Identifier: Apache-2.0

//! Netlists shipped with the library.
//!
//! `s27` is the ISCAS89 circuit. `s298s`, `s344s` and `s349s` are seeded
//! synthetic stand-ins with the interface sizes and gate histograms of the
//! ISCAS89 circuits they are named after; they are produced by
//! [`surrogate_spec`] + [`generate`](crate::netlist::generate) and checked
//! in verbatim.

use crate::netlist::{
    parse_bench_with, Circuit, GateKind, GeneratorSpec, NetlistError, ParseOptions,
};

const S27: &str = include_str!("../benchmarks/s27.bench");
const DFF_CELL: &str = include_str!("../benchmarks/dff_cell.bench");
const SHIFT8: &str = include_str!("../benchmarks/shift8.bench");
const COUNTER8: &str = include_str!("../benchmarks/counter8.bench");
const S298S: &str = include_str!("../benchmarks/s298s.bench");
const S344S: &str = include_str!("../benchmarks/s344s.bench");
const S349S: &str = include_str!("../benchmarks/s349s.bench");

pub const NAMES: [&str; 7] = ["dff_cell", "shift8", "counter8", "s27", "s298s", "s344s", "s349s"];

pub fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "s27" => S27,
        "dff_cell" => DFF_CELL,
        "shift8" => SHIFT8,
        "counter8" => COUNTER8,
        "s298s" => S298S,
        "s344s" => S344S,
        "s349s" => S349S,
        _ => return None,
    })
}

/// Parsed (not decomposed) builtin circuit.
pub fn load(name: &str) -> Result<Circuit, NetlistError> {
    let text = source(name).ok_or_else(|| NetlistError::UnknownNet(format!("builtin:{name}")))?;
    let opts = ParseOptions {
        allow_latch_loops: name == "dff_cell",
    };
    parse_bench_with(name, text, opts)
}

/// Generator settings and seed for a synthetic benchmark.
pub fn surrogate_spec(name: &str) -> Option<(GeneratorSpec, u64)> {
    use GateKind::*;
    let (inputs, outputs, flipflops, gates, seed) = match name {
        "s298s" => (3, 6, 14, [(Not, 44), (And, 31), (Nand, 9), (Or, 16), (Nor, 19)], 298),
        "s344s" => (9, 11, 15, [(Not, 59), (And, 44), (Nand, 18), (Or, 9), (Nor, 30)], 344),
        "s349s" => (9, 11, 15, [(Not, 57), (And, 44), (Nand, 19), (Or, 10), (Nor, 31)], 349),
        _ => return None,
    };
    Some((
        GeneratorSpec {
            name: name.to_string(),
            inputs,
            outputs,
            flipflops,
            gates: gates.to_vec(),
            max_fanin: 4,
        },
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{generate, write_bench};

    #[test]
    fn surrogates_match_generator() {
        for name in ["s298s", "s344s", "s349s"] {
            let (spec, seed) = surrogate_spec(name).unwrap();
            let text = write_bench(&generate(&spec, seed).unwrap());
            let path = format!("{}/benchmarks/{name}.bench", env!("CARGO_MANIFEST_DIR"));
            if std::env::var_os("TROJANBMC_BLESS").is_some() {
                std::fs::write(&path, &text).unwrap();
            }
            assert_eq!(text, source(name).unwrap(), "{name} differs from its generator");
        }
    }

    #[test]
    fn interfaces() {
        let expect = [
            ("s27", 4, 1, 3),
            ("dff_cell", 2, 1, 0),
            ("shift8", 1, 1, 8),
            ("counter8", 1, 9, 8),
            ("s298s", 3, 6, 14),
            ("s344s", 9, 11, 15),
            ("s349s", 9, 11, 15),
        ];
        for (name, i, o, f) in expect {
            let c = load(name).unwrap();
            assert_eq!(c.primary_inputs().len(), i, "{name}");
            assert_eq!(c.primary_outputs().len(), o, "{name}");
            assert_eq!(c.flipflops().len(), f, "{name}");
        }
    }

    #[test]
    fn s349s_histogram() {
        let h = load("s349s").unwrap().histogram();
        assert_eq!(h[&GateKind::Not], 57);
        assert_eq!(h[&GateKind::And], 44);
        assert_eq!(h[&GateKind::Nand], 19);
        assert_eq!(h[&GateKind::Or], 10);
        assert_eq!(h[&GateKind::Nor], 31);
        assert_eq!(h[&GateKind::Dff], 15);
    }
}

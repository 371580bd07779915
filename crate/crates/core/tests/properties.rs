// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::{bits, equivalent, rel_close, FlipFlops, Sim};
use trojanbmc::checker::{complement, BoundMetric, BoundProperty};
use trojanbmc::intrusion::{inject, inject_all, IntrusionSpec, Target};
use trojanbmc::netlist::{
    classify_locations, decompose_universal, generate, parse_bench, write_bench, Circuit,
    GateKind, GeneratorSpec, LocationClass,
};
use trojanbmc::sidechannel::{circuit_bounds, switching_activity, CircuitModel, ModelOptions};
use trojanbmc::statespace::{
    partition, Bits, ExploreConfig, Explorer, Metric, MetricMask, TransitionSystem,
};
use trojanbmc::techmodel::{sample_variations, Polarity, TechnologyParams, VariationSpec};

const REL: f64 = 1e-12;

fn circuit_strategy(max_inputs: usize, max_ffs: usize) -> impl Strategy<Value = Circuit> {
    (
        1..=max_inputs,
        1usize..=3,
        0..=max_ffs,
        1usize..=6,
        0usize..=4,
        0usize..=3,
        0usize..=3,
        0usize..=2,
        any::<u64>(),
    )
        .prop_map(|(i, o, f, nand, nor, not, and, xor, seed)| {
            use GateKind::*;
            let spec = GeneratorSpec {
                name: "p".into(),
                inputs: i,
                outputs: o,
                flipflops: f,
                gates: vec![(Nand, nand), (Nor, nor), (Not, not), (And, and), (Xor, xor)],
                max_fanin: 3,
            };
            generate(&spec, seed).unwrap()
        })
}

fn decomposed_strategy(max_inputs: usize, max_ffs: usize) -> impl Strategy<Value = Circuit> {
    circuit_strategy(max_inputs, max_ffs).prop_map(|c| decompose_universal(&c).unwrap())
}

fn nominal_system(c: &Circuit) -> TransitionSystem {
    let m = CircuitModel::new(c, &TechnologyParams::nominal_45nm(), &ModelOptions::default())
        .unwrap();
    TransitionSystem::build(c, m, vec![]).unwrap()
}

/// Every transition of an exhaustive exploration as settled value pairs.
fn transitions(sys: &TransitionSystem, bound: usize) -> Vec<(Vec<bool>, Vec<bool>)> {
    let mut ex = Explorer::new(sys, ExploreConfig::exhaustive(bound)).unwrap();
    let mut out = Vec::new();
    while ex.next_step().is_some() {
        let (p, c) = ex.last_values();
        out.push((p.to_vec(), c.to_vec()));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bench_round_trip(c in circuit_strategy(6, 3)) {
        let again = parse_bench("p", &write_bench(&c)).unwrap();
        prop_assert_eq!(again.gates().len(), c.gates().len());
        for g in c.gates() {
            let name = &c.net(g.output).name;
            let n = again.net_by_name(name).unwrap();
            let h = again.driver_gate(n).unwrap();
            prop_assert_eq!(h.kind, g.kind);
            let ins = |x: &Circuit, v: &[trojanbmc::netlist::NetId]| -> Vec<String> {
                v.iter().map(|n| x.net(*n).name.clone()).collect()
            };
            prop_assert_eq!(ins(&again, &h.inputs), ins(&c, &g.inputs));
        }
    }

    #[test]
    fn decomposition_preserves_function(c in circuit_strategy(6, 4)) {
        let d = decompose_universal(&c).unwrap();
        prop_assert!(d.is_decomposed());
        prop_assert!(equivalent(&c, &d, FlipFlops::ByName));
    }

    #[test]
    fn locations_cover_every_net(c in decomposed_strategy(6, 3)) {
        let m = CircuitModel::new(&c, &TechnologyParams::nominal_45nm(), &ModelOptions::default())
            .unwrap();
        let classes = classify_locations(&c, &m.gate_delays());
        for n in c.nets() {
            prop_assert!(classes.contains_key(&n.id), "net {} unclassified", n.name);
        }
        for n in c.primary_inputs() {
            prop_assert_eq!(classes[n], LocationClass::Input);
        }
    }

    #[test]
    fn aggregates_are_sums_of_gates(c in decomposed_strategy(3, 3)) {
        let sys = nominal_system(&c);
        for (p, q) in transitions(&sys, 2) {
            let v = sys.valuation(&p, &q, MetricMask::ALL);
            let g = sys.gate_contributions(&p, &q);
            prop_assert!(rel_close(v.dp, g.dp.iter().sum(), REL));
            prop_assert!(rel_close(v.lp, g.lp.iter().sum(), REL));
        }
    }

    #[test]
    fn partition_shares_cover_the_aggregate(c in decomposed_strategy(3, 3)) {
        let sys = nominal_system(&c);
        for metric in [Metric::Dp, Metric::Lp] {
            let parts = partition(&c, metric);
            let mut owned = BTreeSet::new();
            for p in &parts {
                for g in &p.owned {
                    prop_assert!(owned.insert(*g), "gate owned twice");
                }
            }
            prop_assert_eq!(owned.len(), c.gates().len());
            for (p, q) in transitions(&sys, 1) {
                let g = sys.gate_contributions(&p, &q);
                let per_gate = if metric == Metric::Dp { &g.dp } else { &g.lp };
                let split: f64 = parts.iter().map(|x| x.local_sum(per_gate)).sum();
                prop_assert!(rel_close(split, per_gate.iter().sum(), REL));
            }
        }
    }

    #[test]
    fn envelope_contains_every_sample(c in decomposed_strategy(3, 2), seed in any::<u64>()) {
        let nominal = TechnologyParams::nominal_45nm();
        let samples = sample_variations(&nominal, &VariationSpec::gaussian(0.05, 6, seed)).unwrap();
        let opts = ModelOptions::default();
        let env = circuit_bounds(&c, &samples, &opts, &[], None).unwrap();
        prop_assert!(env.lp_min <= env.lp_max);
        for p in &samples {
            let m = CircuitModel::new(&c, p, &opts).unwrap();
            let sys = TransitionSystem::build(&c, m, vec![]).unwrap();
            for (a, b) in transitions(&sys, 2) {
                let v = sys.valuation(&a, &b, MetricMask::ALL);
                prop_assert!(v.dp >= 0.0 && v.dp <= env.dp_max * (1.0 + REL));
                prop_assert!(v.lp >= env.lp_min * (1.0 - REL) && v.lp <= env.lp_max * (1.0 + REL));
            }
        }
    }

    #[test]
    fn envelope_widens_with_samples(c in decomposed_strategy(4, 2), seed in any::<u64>()) {
        let nominal = TechnologyParams::nominal_45nm();
        let samples = sample_variations(&nominal, &VariationSpec::gaussian(0.05, 8, seed)).unwrap();
        let opts = ModelOptions::default();
        let small = circuit_bounds(&c, &samples[..3], &opts, &[], None).unwrap();
        let large = circuit_bounds(&c, &samples, &opts, &[], None).unwrap();
        prop_assert!(large.dp_max >= small.dp_max);
        prop_assert!(large.lp_max >= small.lp_max);
        prop_assert!(large.lp_min <= small.lp_min);
    }

    #[test]
    fn sampled_parameters_stay_valid(seed in any::<u64>(), sigma in 0.0f64..0.5) {
        let nominal = TechnologyParams::nominal_45nm();
        for p in sample_variations(&nominal, &VariationSpec::gaussian(sigma, 16, seed)).unwrap() {
            prop_assert!(p.validate().is_ok());
        }
    }

    #[test]
    fn capacitance_and_resistance_monotone(fo in 1.0f64..8.0, wr in 0.5f64..4.0) {
        let p = TechnologyParams::nominal_45nm();
        for pol in [Polarity::N, Polarity::P] {
            prop_assert!(p.gate_capacitance(pol, fo + 1.0, wr) > p.gate_capacitance(pol, fo, wr));
            prop_assert!(p.gate_capacitance(pol, fo, wr * 1.5) > p.gate_capacitance(pol, fo, wr));
            prop_assert!(p.on_resistance(pol, wr * 1.5).unwrap() < p.on_resistance(pol, wr).unwrap());
        }
    }

    #[test]
    fn activity_is_bounded_and_direction_free(
        c in decomposed_strategy(4, 0),
        seed in any::<u64>(),
        len in 2usize..24,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = c.primary_inputs().len();
        let trace: Vec<Vec<bool>> =
            (0..len).map(|_| (0..n).map(|_| rng.random_bool(0.5)).collect()).collect();
        let fwd = switching_activity(&c, &trace, &[]).unwrap();
        let mut rev_trace = trace.clone();
        rev_trace.reverse();
        let rev = switching_activity(&c, &rev_trace, &[]).unwrap();
        for (a, b) in fwd.iter().zip(&rev) {
            prop_assert!((0.0..=1.0).contains(a));
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn c_int_is_order_independent(c in decomposed_strategy(5, 2), k1 in 1usize..5, k2 in 1usize..5, pick in any::<u64>()) {
        let nets: Vec<String> = c.nets().iter().map(|n| n.name.clone()).collect();
        prop_assume!(nets.len() >= 2);
        let i = (pick % nets.len() as u64) as usize;
        let j = (i + 1 + (pick / 7 % (nets.len() as u64 - 1)) as usize) % nets.len();
        let a = IntrusionSpec::parallel(Target::Net(nets[i].clone()), k1);
        let b = IntrusionSpec::parallel(Target::Net(nets[j].clone()), k2);
        let p = TechnologyParams::nominal_45nm();
        let o = ModelOptions::default();
        let ab = inject_all(&c, &[a.clone(), b.clone()], &p, &o).unwrap();
        let ba = inject_all(&c, &[b, a], &p, &o).unwrap();
        prop_assert_eq!(ab.c_int.len(), 2);
        for (n, v) in &ab.c_int {
            prop_assert!(rel_close(*v, ba.c_int[n], REL));
        }
    }

    #[test]
    fn parallel_intrusion_raises_load_and_leakage(c in decomposed_strategy(5, 2), size in 1usize..6, pick in any::<usize>()) {
        let p = TechnologyParams::nominal_45nm();
        let o = ModelOptions::default();
        let host = &c.nets()[pick % c.nets().len()];
        let ic = inject(&c, &IntrusionSpec::parallel(Target::Net(host.name.clone()), size), &p, &o).unwrap();
        prop_assert!(ic.c_int[&host.id] > 0.0);
        let before = CircuitModel::new(&c, &p, &o).unwrap();
        let after = CircuitModel::new(&ic.circuit, &p, &o).unwrap();
        prop_assert!(after.lp_min_static() > before.lp_min_static());
        prop_assert!(after.lp_max_static() > before.lp_max_static());
        if let Some(g) = c.driver_gate(host.id) {
            let i = g.id.index();
            prop_assert!(after.gates[i].c_total > before.gates[i].c_total);
            // Flip-flops carry no delay model.
            if g.kind != GateKind::Dff {
                prop_assert!(after.gates[i].max_delay() > before.gates[i].max_delay());
            }
        }
        prop_assert!(equivalent(&c, &ic.circuit, FlipFlops::ByGate));
    }

    #[test]
    fn transition_system_matches_truth_table(c in decomposed_strategy(6, 5)) {
        let sys = nominal_system(&c);
        let sim = Sim::new(&c);
        let (ns, ni) = (sim.state_width(), sim.input_width());
        prop_assert_eq!(sys.state_width(), ns);
        for s in 0..(1u64 << ns) {
            for i in 0..(1u64 << ni) {
                let (sb, ib) = (bits(s, ns), bits(i, ni));
                let want = sim.latch(&sim.settle(&sb, &ib));
                let state = Bits::from_fn(ns, |k| sb[k]);
                let input = Bits::from_fn(ni, |k| ib[k]);
                let got = sys.next_state(&sys.settle(&state, &input));
                prop_assert_eq!(got.to_bools(), want);
            }
        }
    }

    #[test]
    fn exploration_visits_every_prefix(c in decomposed_strategy(3, 2), bound in 1usize..4) {
        let sys = nominal_system(&c);
        let i = sys.input_width() as u32;
        let want: usize = (1..=bound as u32).map(|t| 1usize << (i * t)).sum();
        prop_assert_eq!(transitions(&sys, bound).len(), want);
    }

    #[test]
    fn exploration_is_reproducible(c in decomposed_strategy(3, 2)) {
        let a = nominal_system(&c);
        let b = nominal_system(&c);
        let mut x = Explorer::new(&a, ExploreConfig::exhaustive(2)).unwrap();
        let mut y = Explorer::new(&b, ExploreConfig::exhaustive(2)).unwrap();
        loop {
            match (x.next_step(), y.next_step()) {
                (None, None) => break,
                (Some(s), Some(t)) => {
                    prop_assert_eq!(s.state, t.state);
                    prop_assert_eq!(s.valuation.dp.to_bits(), t.valuation.dp.to_bits());
                    prop_assert_eq!(s.valuation.lp.to_bits(), t.valuation.lp.to_bits());
                }
                _ => prop_assert!(false, "lengths differ"),
            }
        }
    }

    #[test]
    fn complement_is_an_involution(bound in 1e-9f64..1.0, which in 0usize..4) {
        let env = trojanbmc::sidechannel::BoundEnvelope {
            dp_max: bound,
            lp_max: bound,
            lp_min: bound / 2.0,
            path_delay_max: vec![bound],
            gate_dp_max: vec![],
            gate_lp_max: vec![],
            gate_lp_min: vec![],
            gate_delay_max: vec![],
            sample_count: 1,
        };
        let metric = [BoundMetric::Dp, BoundMetric::LpUpper, BoundMetric::LpLower, BoundMetric::Delay(0)][which];
        let p = BoundProperty::out_of_bound(metric, &env);
        let q = complement(&p);
        prop_assert_ne!(&q, &p);
        prop_assert_eq!(complement(&q), p);
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Intrusion effect sweeps and detectability thresholds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    inject, nominal_classes, resolve_target, Attachment, IntrudedCircuit, IntrusionError,
    IntrusionMode, IntrusionSpec, Target,
};
use crate::netlist::{worst_path_through, CellKind, Circuit, GateId, LocationClass, NetId};
use crate::sidechannel::{circuit_bounds, BoundEnvelope, CircuitModel, ModelOptions, StateRestriction};
use crate::statespace::{ExploreConfig, Explorer, InputPolicy, Metric, MetricMask, TransitionSystem};
use crate::techmodel::TechnologyParams;

/// How an intruded circuit's metric is measured against the clean
/// envelope.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Probe {
    /// Worst case over all feasible gate states (α = 1 for power).
    Static,
    /// Worst transition reached by bounded exploration; the envelope is
    /// restricted to gate states the clean circuit reaches under the same
    /// exploration.
    Reachable {
        bound: usize,
        policy: InputPolicy,
        budget: u128,
    },
}

/// Everything an intrusion experiment holds fixed.
#[derive(Clone, Debug)]
pub struct DetectionSetup<'a> {
    /// Decomposed clean circuit.
    pub base: &'a Circuit,
    pub nominal: &'a TechnologyParams,
    /// Process-variation samples forming the clean envelope.
    pub samples: &'a [TechnologyParams],
    pub opts: ModelOptions,
    pub kind: CellKind,
    pub attach: Attachment,
    /// Placement seed within a location class.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    pub net: String,
    pub dp: f64,
    pub lp: f64,
    pub delay: f64,
    pub d_dp: f64,
    pub d_lp: f64,
    pub d_delay: f64,
    /// Intruded nominal value lies inside the clean envelope.
    pub hidden_dp: bool,
    pub hidden_lp: bool,
    pub hidden_delay: bool,
}

impl<'a> DetectionSetup<'a> {
    fn spec(&self, net: &str, mode: IntrusionMode, size: usize) -> IntrusionSpec {
        IntrusionSpec {
            target: Target::Net(net.to_string()),
            mode,
            size,
            kind: self.kind,
            seed: self.seed,
            attach: self.attach,
            payload: false,
            trigger: None,
        }
    }

    /// Net chosen for `class` with this setup's seed.
    pub fn resolve(&self, class: LocationClass, mode: IntrusionMode) -> Result<NetId, IntrusionError> {
        let classes = nominal_classes(self.base, self.nominal, &self.opts)?;
        let mut spec = self.spec("", mode, 1);
        spec.target = Target::Class(class);
        resolve_target(self.base, &spec, &classes)
    }

    fn inject(&self, net: NetId, mode: IntrusionMode, size: usize) -> Result<IntrudedCircuit, IntrusionError> {
        let name = &self.base.net(net).name;
        inject(self.base, &self.spec(name, mode, size), self.nominal, &self.opts)
    }
}

/// Nominal DP (α = 1), maximum leakage and worst delay through `net`.
/// Dangling intruded gates add no delay: their outputs are unobserved.
fn static_metrics(c: &Circuit, model: &CircuitModel, net: NetId) -> (f64, f64, f64) {
    let mut d = model.gate_delays();
    for g in c.gates() {
        if g.foreign && c.net(g.output).sinks.is_empty() && !c.is_primary_output(g.output) {
            d[g.id.index()] = 0.0;
        }
    }
    let delay = worst_path_through(c, &d, net).map_or(0.0, |p| p.delay);
    (model.dp_static(), model.lp_max_static(), delay)
}

struct Clean {
    nominal: (f64, f64, f64),
    upper: (f64, f64, f64),
}

fn clean_static(setup: &DetectionSetup, net: NetId) -> Result<Clean, IntrusionError> {
    let model = CircuitModel::new(setup.base, setup.nominal, &setup.opts)?;
    let env = circuit_bounds(setup.base, setup.samples, &setup.opts, &[], None)?;
    let delay_up = worst_path_through(setup.base, &env.gate_delay_max, net).map_or(0.0, |p| p.delay);
    Ok(Clean {
        nominal: static_metrics(setup.base, &model, net),
        upper: (env.dp_max, env.lp_max, delay_up),
    })
}

/// Effect of `size` intruded gates at the net picked for `class`, one row
/// per size. Size 0 is the clean circuit.
pub fn sweep(
    setup: &DetectionSetup,
    class: LocationClass,
    mode: IntrusionMode,
    sizes: &[usize],
) -> Result<Vec<SweepRow>, IntrusionError> {
    let net = setup.resolve(class, mode)?;
    let clean = clean_static(setup, net)?;
    let name = setup.base.net(net).name.clone();
    sizes
        .par_iter()
        .map(|&size| {
            let (dp, lp, delay) = if size == 0 {
                clean.nominal
            } else {
                let ic = setup.inject(net, mode, size)?;
                let m = CircuitModel::new(&ic.circuit, setup.nominal, &setup.opts)?;
                static_metrics(&ic.circuit, &m, net)
            };
            Ok(SweepRow {
                size,
                net: name.clone(),
                dp,
                lp,
                delay,
                d_dp: dp - clean.nominal.0,
                d_lp: lp - clean.nominal.1,
                d_delay: delay - clean.nominal.2,
                hidden_dp: dp <= clean.upper.0,
                hidden_lp: lp <= clean.upper.1,
                hidden_delay: delay <= clean.upper.2,
            })
        })
        .collect()
}

fn pick(metric: Metric, v: (f64, f64, f64)) -> f64 {
    match metric {
        Metric::Dp => v.0,
        Metric::Lp => v.1,
        Metric::Delay => v.2,
    }
}

/// Smallest `k` in `1..=max` with `f(k)`, assuming `f` is monotone.
/// Doubling then bisection.
pub(crate) fn first_true(
    max: usize,
    mut f: impl FnMut(usize) -> Result<bool, IntrusionError>,
) -> Result<Option<usize>, IntrusionError> {
    if max == 0 {
        return Ok(None);
    }
    let mut lo = 0;
    let mut k = 1;
    let hi = loop {
        if f(k)? {
            break k;
        }
        lo = k;
        if k == max {
            return Ok(None);
        }
        k = (k * 2).min(max);
    };
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if f(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

struct ReachableProbe {
    env: BoundEnvelope,
    clean_path: Option<(Vec<GateId>, NetId)>,
    cfg: ExploreConfig,
}

fn worst_transition(sys: &TransitionSystem, cfg: ExploreConfig) -> Result<(f64, f64, f64), IntrusionError> {
    let mut ex = Explorer::new(sys, cfg)?;
    let (mut dp, mut lp, mut d) = (0.0f64, 0.0f64, 0.0f64);
    while let Some(st) = ex.next_step() {
        dp = dp.max(st.valuation.dp);
        lp = lp.max(st.valuation.lp);
        if let Some(&x) = st.valuation.delays.first() {
            d = d.max(x);
        }
    }
    Ok((dp, lp, d))
}

fn reachable_probe(
    setup: &DetectionSetup,
    net: NetId,
    cfg: ExploreConfig,
) -> Result<ReachableProbe, IntrusionError> {
    let model = CircuitModel::new(setup.base, setup.nominal, &setup.opts)?;
    let worst = worst_path_through(setup.base, &model.gate_delays(), net);
    let paths: Vec<Vec<GateId>> = worst.iter().map(|p| p.gates.clone()).collect();
    let sys = TransitionSystem::build(setup.base, model, paths)?;
    let mut restriction = StateRestriction::empty(setup.base);
    let mut ex = Explorer::new(&sys, cfg)?;
    while ex.next_step().is_some() {
        let (prev, cur) = ex.last_values();
        restriction.observe(setup.base, Some(prev), cur);
    }
    let env = circuit_bounds(
        setup.base,
        setup.samples,
        &setup.opts,
        worst.as_slice(),
        Some(&restriction),
    )?;
    Ok(ReachableProbe {
        env,
        clean_path: worst.map(|p| (p.gates, p.source)),
        cfg,
    })
}

/// Smallest intrusion at the net picked for `class` whose nominal metric
/// leaves the clean envelope, searching sizes up to `max_size`. Series
/// sizes are even. `None` when nothing up to `max_size` is detected.
pub fn min_detectable_size(
    setup: &DetectionSetup,
    class: LocationClass,
    mode: IntrusionMode,
    metric: Metric,
    probe: Probe,
    max_size: usize,
) -> Result<Option<usize>, IntrusionError> {
    let net = setup.resolve(class, mode)?;
    min_detectable_at(setup, net, mode, metric, probe, max_size)
}

/// As [`min_detectable_size`] for an explicit net.
pub fn min_detectable_at(
    setup: &DetectionSetup,
    net: NetId,
    mode: IntrusionMode,
    metric: Metric,
    probe: Probe,
    max_size: usize,
) -> Result<Option<usize>, IntrusionError> {
    let unit = match mode {
        IntrusionMode::Parallel => 1,
        IntrusionMode::Series => 2,
    };
    let detected = detector(setup, net, mode, metric, probe)?;
    Ok(first_true(max_size / unit, |k| detected(k * unit))?.map(|k| k * unit))
}

/// Predicate "an intrusion of this size is detected".
/// Answers whether an intrusion of the given size is detected.
pub type Detector<'s> = Box<dyn Fn(usize) -> Result<bool, IntrusionError> + 's>;

pub fn detector<'s>(
    setup: &'s DetectionSetup,
    net: NetId,
    mode: IntrusionMode,
    metric: Metric,
    probe: Probe,
) -> Result<Detector<'s>, IntrusionError> {
    match probe {
        Probe::Static => {
            let clean = clean_static(setup, net)?;
            Ok(Box::new(move |size| {
                let ic = setup.inject(net, mode, size)?;
                let m = CircuitModel::new(&ic.circuit, setup.nominal, &setup.opts)?;
                let v = static_metrics(&ic.circuit, &m, net);
                Ok(pick(metric, v) > pick(metric, clean.upper))
            }))
        }
        Probe::Reachable {
            bound,
            policy,
            budget,
        } => {
            let cfg = ExploreConfig {
                bound,
                policy,
                budget,
                mask: MetricMask {
                    dp: metric == Metric::Dp,
                    lp: metric == Metric::Lp,
                    delay: metric == Metric::Delay,
                },
            };
            let rp = reachable_probe(setup, net, cfg)?;
            let upper = (
                rp.env.dp_max,
                rp.env.lp_max,
                rp.env.path_delay_max.first().copied().unwrap_or(0.0),
            );
            Ok(Box::new(move |size| {
                let ic = setup.inject(net, mode, size)?;
                let m = CircuitModel::new(&ic.circuit, setup.nominal, &setup.opts)?;
                let paths = rp
                    .clean_path
                    .iter()
                    .map(|(g, s)| ic.map_path(g, *s))
                    .collect();
                let sys = TransitionSystem::build(&ic.circuit, m, paths)?;
                let v = worst_transition(&sys, rp.cfg)?;
                Ok(pick(metric, v) > pick(metric, upper))
            }))
        }
    }
}

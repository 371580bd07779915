// SPDX-License-Identifier: Apache-2.0

//! Bound properties over explored transitions, counterexamples and the
//! exception-driven vulnerability loop.

mod analysis;

pub use analysis::{
    rank_vulnerable, vulnerability_analysis, AnalysisConfig, AnalysisReport, PropertyRun,
    RankedNet, Strategy,
};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::netlist::{Circuit, GateId, NetId};
use crate::sidechannel::{BoundEnvelope, CircuitModel};
use crate::statespace::{
    Bits, ExploreConfig, ExploreError, Explorer, MetricMask, MetricValuation, Step,
    TransitionSystem,
};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Quantifier {
    Eventually,
    Globally,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundMetric {
    Dp,
    LpUpper,
    LpLower,
    /// Monitored path index.
    Delay(usize),
}

impl BoundMetric {
    pub fn name(self) -> String {
        match self {
            BoundMetric::Dp => "DP".into(),
            BoundMetric::LpUpper => "LP_UPPER".into(),
            BoundMetric::LpLower => "LP_LOWER".into(),
            BoundMetric::Delay(k) => format!("DELAY({k})"),
        }
    }

    pub fn operand(self) -> String {
        match self {
            BoundMetric::Dp => "DP".into(),
            BoundMetric::LpUpper | BoundMetric::LpLower => "LP".into(),
            BoundMetric::Delay(k) => format!("D({k})"),
        }
    }

    pub fn value(self, v: &MetricValuation) -> f64 {
        match self {
            BoundMetric::Dp => v.dp,
            BoundMetric::LpUpper | BoundMetric::LpLower => v.lp,
            BoundMetric::Delay(k) => v.delays.get(k).copied().unwrap_or(0.0),
        }
    }

    pub fn mask(self) -> MetricMask {
        MetricMask {
            dp: self == BoundMetric::Dp,
            lp: matches!(self, BoundMetric::LpUpper | BoundMetric::LpLower),
            delay: matches!(self, BoundMetric::Delay(_)),
        }
    }

    /// The envelope component the metric is compared against.
    pub fn bound(self, env: &BoundEnvelope) -> f64 {
        match self {
            BoundMetric::Dp => env.dp_max,
            BoundMetric::LpUpper => env.lp_max,
            BoundMetric::LpLower => env.lp_min,
            BoundMetric::Delay(k) => env.path_delay_max.get(k).copied().unwrap_or(0.0),
        }
    }
}

/// `bound OP value`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparison {
    pub fn negate(self) -> Self {
        match self {
            Comparison::Lt => Comparison::Ge,
            Comparison::Ge => Comparison::Lt,
            Comparison::Gt => Comparison::Le,
            Comparison::Le => Comparison::Gt,
        }
    }

    pub fn eval(self, bound: f64, value: f64) -> bool {
        match self {
            Comparison::Lt => bound < value,
            Comparison::Le => bound <= value,
            Comparison::Gt => bound > value,
            Comparison::Ge => bound >= value,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
        }
    }
}

/// Exact `(state, input, next-input)` of a transition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TransitionPattern {
    pub state: Bits,
    pub input: Bits,
    pub next_input: Bits,
}

impl TransitionPattern {
    pub fn of(step: &Step) -> Self {
        TransitionPattern {
            state: step.prev_state.clone(),
            input: step.prev_input.clone(),
            next_input: step.input.clone(),
        }
    }
}

impl fmt::Display for TransitionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.state, self.input, self.next_input)
    }
}

/// `Q (guard -> bound OP metric)` minus the excepted transitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundProperty {
    pub quantifier: Quantifier,
    pub metric: BoundMetric,
    pub comparison: Comparison,
    pub bound: f64,
    /// Only transitions with a nonzero metric are constrained.
    pub guard: bool,
    pub exceptions: BTreeSet<TransitionPattern>,
}

impl BoundProperty {
    /// The existential out-of-bound form: a transition exceeds the upper
    /// bound (or undercuts the lower one).
    pub fn out_of_bound(metric: BoundMetric, env: &BoundEnvelope) -> Self {
        let comparison = match metric {
            BoundMetric::LpLower => Comparison::Gt,
            _ => Comparison::Lt,
        };
        BoundProperty {
            quantifier: Quantifier::Eventually,
            metric,
            comparison,
            bound: metric.bound(env),
            guard: matches!(metric, BoundMetric::Dp | BoundMetric::Delay(_)),
            exceptions: BTreeSet::new(),
        }
    }

    /// The universal within-bound form.
    pub fn within_bound(metric: BoundMetric, env: &BoundEnvelope) -> Self {
        complement(&Self::out_of_bound(metric, env))
    }

    /// Does the transition falsify the universal form (equivalently,
    /// witness the existential one)? Exceptions are not consulted.
    pub fn is_violation(&self, v: &MetricValuation) -> bool {
        let value = self.metric.value(v);
        if self.guard && value == 0.0 {
            return false;
        }
        let holds = self.comparison.eval(self.bound, value);
        match self.quantifier {
            Quantifier::Eventually => holds,
            Quantifier::Globally => !holds,
        }
    }

    pub fn excepts(&self, p: &TransitionPattern) -> bool {
        self.exceptions.contains(p)
    }

    pub fn render(&self) -> String {
        let q = match self.quantifier {
            Quantifier::Eventually => "F",
            Quantifier::Globally => "G",
        };
        let operand = self.metric.operand();
        let body = format!("{:.9e} {} {operand}", self.bound, self.comparison.symbol());
        let body = if self.guard {
            format!("{operand} != 0 -> {body}")
        } else {
            body
        };
        if self.exceptions.is_empty() {
            format!("{q}({body})")
        } else {
            format!("{q}(!C -> ({body})) with {} exception(s)", self.exceptions.len())
        }
    }
}

/// Swaps the quantifier and negates the comparison; exceptions are kept.
pub fn complement(p: &BoundProperty) -> BoundProperty {
    BoundProperty {
        quantifier: match p.quantifier {
            Quantifier::Eventually => Quantifier::Globally,
            Quantifier::Globally => Quantifier::Eventually,
        },
        comparison: p.comparison.negate(),
        ..p.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub state: Bits,
    pub input: Bits,
    pub valuation: Option<MetricValuation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    /// Steps 0 (reset, unlabelled) through the violating step.
    pub trace: Vec<TraceStep>,
    pub violating_step: usize,
    pub property: String,
    pub metric: BoundMetric,
    pub pattern: TransitionPattern,
    pub value: f64,
    pub bound: f64,
    /// Nets with the largest contribution excess over the reference.
    pub implicated: Vec<NetId>,
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    HoldsWithinBound,
    Violated(Box<Counterexample>),
    UnknownBudget { required: u128, budget: u128 },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::HoldsWithinBound => "HOLDS_WITHIN_BOUND",
            Verdict::Violated(_) => "VIOLATED",
            Verdict::UnknownBudget { .. } => "UNKNOWN_BUDGET",
        }
    }
}

/// Clean per-gate models against which contribution excess is measured,
/// and the host net each gate of the analysed circuit is charged to.
#[derive(Clone, Debug)]
pub struct Reference {
    /// One entry per gate of the analysed circuit; `None` for gates absent
    /// from the clean circuit.
    pub models: Vec<Option<crate::sidechannel::GateModel>>,
    pub attribution: Vec<NetId>,
}

impl Reference {
    /// Reference for an unmodified circuit: every gate charged to its own
    /// output with its own model, so excess is zero and the largest
    /// absolute contribution decides.
    pub fn identity(c: &Circuit) -> Self {
        Reference {
            models: vec![None; c.gates().len()],
            attribution: c.gates().iter().map(|g| g.output).collect(),
        }
    }

    /// Reference from a clean model whose gates are a prefix of the
    /// analysed circuit's.
    pub fn clean(clean: &CircuitModel, attribution: Vec<NetId>) -> Self {
        let mut models: Vec<_> = clean.gates.iter().cloned().map(Some).collect();
        models.resize(attribution.len(), None);
        Reference {
            models,
            attribution,
        }
    }
}

/// Per-net excess of the transition's contribution to `metric`.
pub fn implicated_nets(
    sys: &TransitionSystem,
    reference: &Reference,
    metric: BoundMetric,
    prev: &[bool],
    cur: &[bool],
) -> (Vec<NetId>, f64) {
    let c = sys.circuit();
    let contrib = sys.gate_contributions(prev, cur);
    let on_path: Option<BTreeSet<GateId>> = match metric {
        BoundMetric::Delay(k) => Some(sys.paths()[k].iter().copied().collect()),
        _ => None,
    };
    let identity = reference.models.iter().all(Option::is_none);
    let mut per_net: std::collections::BTreeMap<NetId, f64> = Default::default();
    for g in c.gates() {
        let i = g.id.index();
        if let Some(p) = &on_path {
            if !p.contains(&g.id) {
                continue;
            }
        }
        let (mine, clean) = {
            let st_prev = crate::sidechannel::input_state(g, prev);
            let st_cur = crate::sidechannel::input_state(g, cur);
            let toggled = prev[g.output.index()] != cur[g.output.index()];
            let clean = match &reference.models[i] {
                None => 0.0,
                Some(m) => match metric {
                    BoundMetric::Dp => {
                        if toggled {
                            m.dp_coeff
                        } else {
                            0.0
                        }
                    }
                    BoundMetric::LpUpper | BoundMetric::LpLower => m.leak[st_cur],
                    BoundMetric::Delay(_) => m.delay[st_prev][st_cur],
                },
            };
            let mine = match metric {
                BoundMetric::Dp => contrib.dp[i],
                BoundMetric::LpUpper | BoundMetric::LpLower => contrib.lp[i],
                BoundMetric::Delay(_) => contrib.delay[i],
            };
            (mine, clean)
        };
        let excess = if identity { mine } else { mine - clean };
        let excess = if metric == BoundMetric::LpLower {
            -excess
        } else {
            excess
        };
        *per_net.entry(reference.attribution[i]).or_default() += excess;
    }
    let best = per_net.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return (Vec::new(), 0.0);
    }
    let tol = 1e-12 * best.abs();
    let nets = per_net
        .iter()
        .filter(|(_, &v)| (best - v).abs() <= tol)
        .map(|(&n, _)| n)
        .collect();
    (nets, best)
}

/// Settled trace from reset under `inputs` (steps 1..), with step 0 the
/// reset state under all-zero inputs.
pub fn replay(sys: &TransitionSystem, inputs: &[Bits], mask: MetricMask) -> Vec<TraceStep> {
    let mut out = Vec::with_capacity(inputs.len() + 1);
    let mut state = sys.reset_state().clone();
    let mut input = Bits::zeros(sys.input_width());
    let mut values = sys.settle(&state, &input);
    out.push(TraceStep {
        step: 0,
        state: state.clone(),
        input: input.clone(),
        valuation: None,
    });
    for (t, i) in inputs.iter().enumerate() {
        state = sys.next_state(&values);
        input = i.clone();
        let cur = sys.settle(&state, &input);
        let v = sys.valuation(&values, &cur, mask);
        values = cur;
        out.push(TraceStep {
            step: t + 1,
            state: state.clone(),
            input: input.clone(),
            valuation: Some(v),
        });
    }
    out
}

pub(crate) fn counterexample(
    ex: &Explorer,
    step: &Step,
    property: &BoundProperty,
    reference: &Reference,
) -> Counterexample {
    let sys = ex.system();
    let (prev, cur) = ex.last_values();
    let (implicated, excess) = implicated_nets(sys, reference, property.metric, prev, cur);
    let trace = replay(sys, &ex.last_inputs(), property.metric.mask());
    Counterexample {
        trace,
        violating_step: step.depth,
        property: property.render(),
        metric: property.metric,
        pattern: TransitionPattern::of(step),
        value: property.metric.value(&step.valuation),
        bound: property.bound,
        implicated,
        excess,
    }
}

/// Scans from the explorer's current position to the next violating,
/// non-excepted transition.
pub(crate) fn next_violation(
    ex: &mut Explorer,
    property: &BoundProperty,
    reference: &Reference,
) -> Option<Counterexample> {
    while let Some(step) = ex.next_step() {
        if property.is_violation(&step.valuation) && !property.excepts(&TransitionPattern::of(&step))
        {
            return Some(counterexample(ex, &step, property, reference));
        }
    }
    None
}

/// Bounded check. The first violating, non-excepted transition in
/// exploration order is returned as the counterexample.
pub fn check(
    sys: &TransitionSystem,
    property: &BoundProperty,
    cfg: ExploreConfig,
    reference: &Reference,
) -> Result<Verdict, ExploreError> {
    let cfg = ExploreConfig {
        mask: property.metric.mask(),
        ..cfg
    };
    let mut ex = match Explorer::new(sys, cfg) {
        Ok(ex) => ex,
        Err(ExploreError::BudgetExceeded { required, budget }) => {
            return Ok(Verdict::UnknownBudget { required, budget })
        }
        Err(e) => return Err(e),
    };
    Ok(match next_violation(&mut ex, property, reference) {
        Some(ce) => Verdict::Violated(Box::new(ce)),
        None => Verdict::HoldsWithinBound,
    })
}

// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs: load inputs, build the envelope, inject, explore,
//! check and write report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::benchmarks;
use crate::checker::{
    vulnerability_analysis, AnalysisConfig, AnalysisReport, BoundMetric, BoundProperty,
    PropertyRun, RankedNet, Reference, Strategy,
};
use crate::intrusion::{
    inject_all, min_detectable_at, nominal_classes, sweep, DetectionSetup, IntrudedCircuit,
    IntrusionError, IntrusionMode, IntrusionSpec, Probe, SweepRow,
};
use crate::netlist::{
    decompose_universal, enumerate_paths, worst_path_through, CellKind, Circuit, GateKind,
    LocationClass, NetId, NetlistError, PathDescriptor,
};
use crate::sidechannel::{
    circuit_bounds, BoundEnvelope, CircuitModel, ModelOptions, SideChannelError, StateRestriction,
};
use crate::statespace::{
    export_smv, ExploreConfig, ExploreError, Explorer, InputPolicy, Metric, TransitionSystem,
    DEFAULT_BUDGET,
};
use crate::techmodel::{sample_variations, TechError, TechnologyParams, VariationSpec};

pub const TOOL_NAME: &str = "trojanbmc";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable capping the transition count of exhaustive runs.
pub const BUDGET_ENV: &str = "TROJANBMC_BUDGET";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Netlist {
        context: String,
        source: NetlistError,
    },
    #[error("{context}: {source}")]
    Tech { context: String, source: TechError },
    #[error(transparent)]
    Intrusion(#[from] IntrusionError),
    #[error(transparent)]
    SideChannel(#[from] SideChannelError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl PipelineError {
    /// 1 input error, 2 invariant violation, 3 budget exceeded.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Netlist { source, .. } => netlist_exit_code(source),
            PipelineError::Explore(ExploreError::BudgetExceeded { .. })
            | PipelineError::Intrusion(IntrusionError::Explore(ExploreError::BudgetExceeded {
                ..
            })) => 3,
            PipelineError::Explore(_) | PipelineError::SideChannel(_) => 2,
            PipelineError::Intrusion(e) => match e {
                IntrusionError::Netlist(n) => netlist_exit_code(n),
                IntrusionError::NotDecomposed
                | IntrusionError::SideChannel(_)
                | IntrusionError::Explore(_) => 2,
                _ => 1,
            },
            PipelineError::Io { .. } | PipelineError::Tech { .. } | PipelineError::Config(_) => 1,
        }
    }
}

/// Syntax-level problems are input errors; structurally invalid netlists
/// are invariant violations.
pub fn netlist_exit_code(e: &NetlistError) -> i32 {
    match e {
        NetlistError::Syntax { .. }
        | NetlistError::UnsupportedGate(_)
        | NetlistError::Arity { .. }
        | NetlistError::NoGates => 1,
        NetlistError::MultiplyDriven(_)
        | NetlistError::Undriven(_)
        | NetlistError::CombinationalCycle(_)
        | NetlistError::UnknownNet(_) => 2,
    }
}

/// Input policy as given on the command line; the random seed comes from
/// the run seed.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyChoice {
    Exhaustive,
    Random { sequences: usize },
}

impl PolicyChoice {
    /// `exhaustive` or `random:N`.
    pub fn parse(s: &str) -> Option<Self> {
        if s == "exhaustive" {
            return Some(PolicyChoice::Exhaustive);
        }
        let n = s.strip_prefix("random:")?.parse().ok()?;
        (n > 0).then_some(PolicyChoice::Random { sequences: n })
    }

    pub fn resolve(self, seed: u64) -> InputPolicy {
        match self {
            PolicyChoice::Exhaustive => InputPolicy::Exhaustive,
            PolicyChoice::Random { sequences } => InputPolicy::Random { seed, sequences },
        }
    }
}

impl std::fmt::Display for PolicyChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicyChoice::Exhaustive => f.write_str("exhaustive"),
            PolicyChoice::Random { sequences } => write!(f, "random:{sequences}"),
        }
    }
}

/// Parses `dp,lp,delay` (any subset, any order).
pub fn parse_metrics(s: &str) -> Option<Vec<Metric>> {
    let mut v: Vec<Metric> = s
        .split(',')
        .map(|t| Metric::from_name(t.trim()))
        .collect::<Option<_>>()?;
    v.sort();
    v.dedup();
    (!v.is_empty()).then_some(v)
}

/// Envelope the analysed circuit is checked against.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeMode {
    /// Worst case over all feasible gate states.
    Static,
    /// Restricted to gate states and transitions the clean circuit reaches
    /// under the same exploration.
    Reachable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// File path or `builtin:NAME`.
    pub netlist: String,
    pub tech: Option<PathBuf>,
    pub variation: Option<PathBuf>,
    pub intrude: Option<PathBuf>,
    pub bound: usize,
    pub policy: PolicyChoice,
    pub metrics: Vec<Metric>,
    pub out: PathBuf,
    pub seed: u64,
    pub emit_smv: bool,
    pub budget: u128,
    pub max_iterations: usize,
    pub strategy: Strategy,
    pub envelope: EnvelopeMode,
    /// Longest clean paths monitored for delay, in addition to the worst
    /// path through each intruded net.
    pub top_paths: usize,
    /// Largest size tried when searching detection thresholds; 0 skips it.
    pub detect_max: usize,
}

impl RunConfig {
    pub fn new(netlist: &str, out: &Path) -> Self {
        RunConfig {
            netlist: netlist.to_string(),
            tech: None,
            variation: None,
            intrude: None,
            bound: 2,
            policy: PolicyChoice::Exhaustive,
            metrics: Metric::ALL.to_vec(),
            out: out.to_path_buf(),
            seed: 1,
            emit_smv: false,
            budget: DEFAULT_BUDGET,
            max_iterations: 10_000,
            strategy: Strategy::Incremental,
            envelope: EnvelopeMode::Reachable,
            top_paths: 4,
            detect_max: 64,
        }
    }

    pub fn explore(&self) -> ExploreConfig {
        ExploreConfig {
            bound: self.bound,
            policy: self.policy.resolve(self.seed),
            budget: self.budget,
            ..ExploreConfig::exhaustive(self.bound)
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.bound == 0 {
            return Err(PipelineError::Config("bound must be at least 1".into()));
        }
        if self.metrics.is_empty() {
            return Err(PipelineError::Config("no metrics selected".into()));
        }
        if self.max_iterations == 0 {
            return Err(PipelineError::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Budget from `TROJANBMC_BUDGET`, or the default when unset.
pub fn budget_from_env() -> Result<u128, PipelineError> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| PipelineError::Config(format!("{BUDGET_ENV}=`{v}` is not a count"))),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Source text of a netlist argument and the circuit name it implies.
pub fn netlist_source(arg: &str) -> Result<(String, String), PipelineError> {
    if let Some(name) = arg.strip_prefix("builtin:") {
        let text = benchmarks::source(name).ok_or_else(|| {
            PipelineError::Config(format!(
                "unknown builtin `{name}` (available: {})",
                benchmarks::NAMES.join(", ")
            ))
        })?;
        return Ok((name.to_string(), text.to_string()));
    }
    let path = Path::new(arg);
    let name = path
        .file_stem()
        .map_or_else(|| "circuit".to_string(), |s| s.to_string_lossy().into_owned());
    Ok((name, read(path)?))
}

/// Parses a netlist argument (not decomposed).
pub fn load_netlist(arg: &str) -> Result<Circuit, PipelineError> {
    let wrap = |source| PipelineError::Netlist {
        context: arg.to_string(),
        source,
    };
    if let Some(name) = arg.strip_prefix("builtin:") {
        if benchmarks::source(name).is_some() {
            return benchmarks::load(name).map_err(wrap);
        }
    }
    let (name, text) = netlist_source(arg)?;
    crate::netlist::parse_bench(&name, &text).map_err(wrap)
}

pub fn load_tech(path: Option<&Path>) -> Result<TechnologyParams, PipelineError> {
    let p = match path {
        None => TechnologyParams::nominal_45nm(),
        Some(path) => TechnologyParams::from_text(&read(path)?).map_err(|source| {
            PipelineError::Tech {
                context: path.display().to_string(),
                source,
            }
        })?,
    };
    p.validate().map_err(|source| PipelineError::Tech {
        context: "technology parameters".into(),
        source,
    })?;
    Ok(p)
}

pub fn load_variation(path: Option<&Path>) -> Result<VariationSpec, PipelineError> {
    let v = match path {
        None => VariationSpec::default(),
        Some(path) => VariationSpec::from_text(&read(path)?).map_err(|source| {
            PipelineError::Tech {
                context: path.display().to_string(),
                source,
            }
        })?,
    };
    v.validate().map_err(|source| PipelineError::Tech {
        context: "variation spec".into(),
        source,
    })?;
    Ok(v)
}

pub fn load_intrusions(path: Option<&Path>) -> Result<Vec<IntrusionSpec>, PipelineError> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => Ok(IntrusionSpec::parse_file(&read(p)?)?),
    }
}

/// Nominal parameters followed by the variation samples. `seed` replaces
/// the spec's own seed.
pub fn envelope_samples(
    nominal: &TechnologyParams,
    variation: &VariationSpec,
    seed: u64,
) -> Result<Vec<TechnologyParams>, PipelineError> {
    let spec = VariationSpec {
        seed,
        ..variation.clone()
    };
    let mut out = vec![nominal.clone()];
    out.extend(
        sample_variations(nominal, &spec).map_err(|source| PipelineError::Tech {
            context: "variation sampling".into(),
            source,
        })?,
    );
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSummary {
    pub name: String,
    pub inputs: usize,
    pub outputs: usize,
    pub flipflops: usize,
    pub gates: usize,
    pub histogram: BTreeMap<String, usize>,
    pub decomposed_gates: usize,
    pub decomposed_histogram: BTreeMap<String, usize>,
    /// Gates on the nominal critical path of the decomposed circuit.
    pub critical_path_gates: usize,
    /// Nominal critical path delay (s).
    pub critical_path_delay: f64,
}

fn histogram(c: &Circuit) -> BTreeMap<String, usize> {
    c.histogram()
        .into_iter()
        .filter(|(k, _)| *k != GateKind::Dff)
        .map(|(k, n)| (k.name().to_string(), n))
        .collect()
}

/// Structural summary of `original` and its decomposition.
pub fn summarize(
    original: &Circuit,
    decomposed: &Circuit,
    nominal: &TechnologyParams,
) -> Result<CircuitSummary, PipelineError> {
    let m = CircuitModel::new(decomposed, nominal, &ModelOptions::default())?;
    let cp = enumerate_paths(decomposed, &m.gate_delays(), 1);
    let (cp_gates, cp_delay) = cp.first().map_or((0, 0.0), |p| (p.gates.len(), p.delay));
    Ok(CircuitSummary {
        name: original.name().to_string(),
        inputs: original.primary_inputs().len(),
        outputs: original.primary_outputs().len(),
        flipflops: original.flipflops().len(),
        gates: original.combinational_gate_count(),
        histogram: histogram(original),
        decomposed_gates: decomposed.combinational_gate_count(),
        decomposed_histogram: histogram(decomposed),
        critical_path_gates: cp_gates,
        critical_path_delay: cp_delay,
    })
}

/// Parse-only structural report.
pub fn cmd_parse(netlist: &str) -> Result<CircuitSummary, PipelineError> {
    let c = load_netlist(netlist)?;
    let d = decompose_universal(&c).map_err(|source| PipelineError::Netlist {
        context: netlist.to_string(),
        source,
    })?;
    summarize(&c, &d, &TechnologyParams::nominal_45nm())
}

/// Canonical echo of a configuration: file contents instead of paths, no
/// output directory. Its hash identifies a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub netlist: String,
    pub netlist_sha256: String,
    pub tech: String,
    pub variation: String,
    pub intrusions: Vec<String>,
    pub bound: usize,
    pub policy: String,
    pub metrics: Vec<String>,
    pub seed: u64,
    pub budget: String,
    pub max_iterations: usize,
    pub strategy: Strategy,
    pub envelope: EnvelopeMode,
    pub top_paths: usize,
    pub detect_max: usize,
    pub emit_smv: bool,
}

fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub mode: EnvelopeMode,
    /// Nominal set plus variation samples.
    pub samples: usize,
    pub dp_max: f64,
    pub lp_max: f64,
    pub lp_min: f64,
    pub path_delay_max: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub index: usize,
    pub source: String,
    pub sink: String,
    /// Output nets of the path gates in the analysed circuit.
    pub nets: Vec<String>,
    pub clean_nominal_delay: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntrusionSummary {
    pub spec: String,
    pub net: String,
    pub net_id: NetId,
    pub class: Option<LocationClass>,
    pub gates: usize,
    /// Capacitance added at the host net (F).
    pub c_int: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionThreshold {
    pub net: String,
    pub mode: IntrusionMode,
    pub metric: Metric,
    /// Smallest detected size, `None` when nothing up to `max_size` is.
    pub size: Option<usize>,
    pub max_size: usize,
}

/// An expected qualitative outcome next to what this run observed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub statement: String,
    pub observed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub tool: ToolInfo,
    pub config_sha256: String,
    pub seed: u64,
    pub config: ConfigEcho,
    pub circuit: CircuitSummary,
    pub envelope: EnvelopeSummary,
    pub monitored_paths: Vec<PathSummary>,
    pub intrusions: Vec<IntrusionSummary>,
    /// Transitions one exploration visits.
    pub transitions_per_run: String,
    pub runs: Vec<PropertyRun>,
    pub vulnerable: Vec<RankedNet>,
    pub detection: Vec<DetectionThreshold>,
    pub qualitative_expectations: Vec<Expectation>,
}

impl AnalyzeReport {
    pub fn counterexample_count(&self) -> usize {
        self.runs.iter().map(|r| r.counterexamples.len()).sum()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.circuit;
        let _ = writeln!(s, "{} {}", self.tool.name, self.tool.version);
        let _ = writeln!(s, "config sha256 {}", self.config_sha256);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(
            s,
            "circuit {}: {} inputs, {} outputs, {} flip-flops, {} gates ({} decomposed)",
            c.name, c.inputs, c.outputs, c.flipflops, c.gates, c.decomposed_gates
        );
        let e = &self.envelope;
        let _ = writeln!(
            s,
            "envelope ({:?}, {} samples): DP <= {:.6e} W, {:.6e} W <= LP <= {:.6e} W",
            e.mode, e.samples, e.dp_max, e.lp_min, e.lp_max
        );
        for (p, d) in self.monitored_paths.iter().zip(&e.path_delay_max) {
            let _ = writeln!(
                s,
                "path {}: {} -> {} ({} gates), delay <= {:.6e} s",
                p.index,
                p.source,
                p.sink,
                p.nets.len(),
                d
            );
        }
        for i in &self.intrusions {
            let _ = writeln!(
                s,
                "intrusion `{}` at {} ({} gates, C_int {:.6e} F)",
                i.spec, i.net, i.gates, i.c_int
            );
        }
        let _ = writeln!(s, "transitions per exploration {}", self.transitions_per_run);
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{:<10} {:<22} {:>5} CEs {:>6} iterations {:>12} evaluations",
                r.metric.name(),
                r.verdict,
                r.counterexamples.len(),
                r.iterations,
                r.evaluations
            );
        }
        if self.vulnerable.is_empty() {
            s.push_str("no implicated nets\n");
        }
        for (i, v) in self.vulnerable.iter().enumerate() {
            let _ = writeln!(
                s,
                "#{} {} ({} CEs, max excess {:.6e})",
                i + 1,
                v.name,
                v.count,
                v.max_excess
            );
        }
        for d in &self.detection {
            let size = d.size.map_or_else(|| "NOT-FOUND".to_string(), |k| k.to_string());
            let _ = writeln!(
                s,
                "min detectable {} {} at {}: {}",
                d.metric.name(),
                d.mode.name(),
                d.net,
                size
            );
        }
        for q in &self.qualitative_expectations {
            let _ = writeln!(
                s,
                "expectation [{}] {}",
                if q.observed { "met" } else { "not met" },
                q.statement
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "property,verdict,bound,counterexamples,iterations,evaluations,truncated\n",
        );
        for r in &self.runs {
            let bound = r
                .counterexamples
                .first()
                .map_or(f64::NAN, |ce| ce.bound);
            let _ = writeln!(
                s,
                "{},{},{:.9e},{},{},{},{}",
                r.metric.name(),
                r.verdict,
                bound,
                r.counterexamples.len(),
                r.iterations,
                r.evaluations,
                r.truncated
            );
        }
        s
    }
}

/// Non-deterministic facts about a run, kept out of the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub timestamp_unix: u64,
    pub wall_seconds: f64,
    pub peak_rss_kib: Option<u64>,
    pub exit_code: i32,
}

/// Peak resident set size from `/proc/self/status` where available.
pub fn peak_rss_kib() -> Option<u64> {
    let s = fs::read_to_string("/proc/self/status").ok()?;
    let line = s.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

pub struct AnalyzeOutcome {
    pub report: AnalyzeReport,
    /// 0, or 3 when the exploration budget was exceeded.
    pub exit_code: i32,
    pub smv: Option<String>,
}

struct Inputs {
    original: Circuit,
    base: Circuit,
    nominal: TechnologyParams,
    samples: Vec<TechnologyParams>,
    specs: Vec<IntrusionSpec>,
    echo: ConfigEcho,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs, PipelineError> {
    cfg.validate()?;
    let (_, net_text) = netlist_source(&cfg.netlist)?;
    let original = load_netlist(&cfg.netlist)?;
    let base = decompose_universal(&original).map_err(|source| PipelineError::Netlist {
        context: cfg.netlist.clone(),
        source,
    })?;
    let nominal = load_tech(cfg.tech.as_deref())?;
    let variation = load_variation(cfg.variation.as_deref())?;
    let specs = load_intrusions(cfg.intrude.as_deref())?;
    let samples = envelope_samples(&nominal, &variation, cfg.seed)?;
    let echo = ConfigEcho {
        netlist: cfg.netlist.clone(),
        netlist_sha256: sha256_hex(net_text.as_bytes()),
        tech: nominal.to_text(),
        variation: VariationSpec {
            seed: cfg.seed,
            ..variation
        }
        .to_text(),
        intrusions: specs.iter().map(IntrusionSpec::to_line).collect(),
        bound: cfg.bound,
        policy: cfg.policy.to_string(),
        metrics: cfg.metrics.iter().map(|m| m.name().to_string()).collect(),
        seed: cfg.seed,
        budget: cfg.budget.to_string(),
        max_iterations: cfg.max_iterations,
        strategy: cfg.strategy,
        envelope: cfg.envelope,
        top_paths: cfg.top_paths,
        detect_max: cfg.detect_max,
        emit_smv: cfg.emit_smv,
    };
    Ok(Inputs {
        original,
        base,
        nominal,
        samples,
        specs,
        echo,
    })
}

/// Clean paths to monitor: the longest `top` under nominal delays, then the
/// worst path through each target net not already present.
fn monitored_paths(
    base: &Circuit,
    delays: &[f64],
    top: usize,
    targets: &[NetId],
) -> Vec<PathDescriptor> {
    let mut paths = enumerate_paths(base, delays, top);
    for &t in targets {
        if let Some(p) = worst_path_through(base, delays, t) {
            if !paths.iter().any(|q| q.gates == p.gates) {
                paths.push(p);
            }
        }
    }
    paths
}

fn restriction(
    base: &Circuit,
    model: &CircuitModel,
    explore: ExploreConfig,
) -> Result<StateRestriction, PipelineError> {
    let sys = TransitionSystem::build(base, model.clone(), Vec::new())?;
    let mut r = StateRestriction::empty(base);
    let mut ex = Explorer::new(&sys, explore)?;
    while ex.next_step().is_some() {
        let (prev, cur) = ex.last_values();
        r.observe(base, Some(prev), cur);
    }
    Ok(r)
}

fn unknown_runs(metrics: &[Metric], paths: usize, env: &BoundEnvelope) -> Vec<PropertyRun> {
    let mut ms = Vec::new();
    for m in metrics {
        match m {
            Metric::Dp => ms.push(BoundMetric::Dp),
            Metric::Lp => ms.extend([BoundMetric::LpUpper, BoundMetric::LpLower]),
            Metric::Delay => ms.extend((0..paths).map(BoundMetric::Delay)),
        }
    }
    ms.sort();
    ms.into_iter()
        .map(|metric| {
            let prop = BoundProperty::within_bound(metric, env);
            PropertyRun {
                metric,
                property: prop.render(),
                complement: crate::checker::complement(&prop).render(),
                verdict: "UNKNOWN_BUDGET".to_string(),
                counterexamples: Vec::new(),
                iterations: 0,
                evaluations: 0,
                truncated: false,
                exceptions: Vec::new(),
            }
        })
        .collect()
}

/// Runs the full analysis and returns the report without writing files.
pub fn analyze(cfg: &RunConfig) -> Result<AnalyzeOutcome, PipelineError> {
    let inp = load_inputs(cfg)?;
    let opts = ModelOptions::default();
    let clean_model = CircuitModel::new(&inp.base, &inp.nominal, &opts)?;
    let delays = clean_model.gate_delays();
    let classes = nominal_classes(&inp.base, &inp.nominal, &opts)?;

    let intruded: Option<IntrudedCircuit> = if inp.specs.is_empty() {
        None
    } else {
        Some(inject_all(&inp.base, &inp.specs, &inp.nominal, &opts)?)
    };
    let targets = intruded.as_ref().map_or_else(Vec::new, |ic| ic.targets());
    let paths = monitored_paths(&inp.base, &delays, cfg.top_paths, &targets);

    let explore = cfg.explore();
    let transitions = explore.transitions(inp.base.primary_inputs().len());
    let over_budget =
        explore.policy == InputPolicy::Exhaustive && transitions > explore.budget;

    let restricted = cfg.envelope == EnvelopeMode::Reachable && !over_budget;
    let r = if restricted {
        Some(restriction(&inp.base, &clean_model, explore)?)
    } else {
        None
    };
    let env = circuit_bounds(&inp.base, &inp.samples, &opts, &paths, r.as_ref())?;

    let (circuit, reference, sys_paths) = match &intruded {
        None => (
            inp.base.clone(),
            Reference::identity(&inp.base),
            paths.iter().map(|p| p.gates.clone()).collect::<Vec<_>>(),
        ),
        Some(ic) => (
            ic.circuit.clone(),
            Reference::clean(&clean_model, ic.attribution.clone()),
            paths
                .iter()
                .map(|p| ic.map_path(&p.gates, p.source))
                .collect(),
        ),
    };
    let model = CircuitModel::new(&circuit, &inp.nominal, &opts)?;
    let sys = TransitionSystem::build(&circuit, model, sys_paths)?;

    let (analysis, exit_code) = if over_budget {
        (
            AnalysisReport {
                runs: unknown_runs(&cfg.metrics, paths.len(), &env),
                vulnerable: Vec::new(),
            },
            3,
        )
    } else {
        let acfg = AnalysisConfig {
            explore,
            metrics: cfg.metrics.clone(),
            max_iterations: cfg.max_iterations,
            strategy: cfg.strategy,
        };
        (vulnerability_analysis(&sys, &env, &acfg, &reference)?, 0)
    };

    let mut detection = Vec::new();
    if let (Some(ic), false, true) = (&intruded, over_budget, cfg.detect_max > 0) {
        for a in &ic.applied {
            let setup = DetectionSetup {
                base: &inp.base,
                nominal: &inp.nominal,
                samples: &inp.samples,
                opts,
                kind: a.spec.kind,
                attach: a.spec.attach,
                seed: a.spec.seed,
            };
            let probe = match cfg.envelope {
                EnvelopeMode::Static => Probe::Static,
                EnvelopeMode::Reachable => Probe::Reachable {
                    bound: explore.bound,
                    policy: explore.policy,
                    budget: explore.budget,
                },
            };
            for &metric in &cfg.metrics {
                let size = min_detectable_at(
                    &setup,
                    a.net,
                    a.spec.mode,
                    metric,
                    probe,
                    cfg.detect_max,
                )?;
                detection.push(DetectionThreshold {
                    net: inp.base.net(a.net).name.clone(),
                    mode: a.spec.mode,
                    metric,
                    size,
                    max_size: cfg.detect_max,
                });
            }
        }
    }

    let mut expectations = Vec::new();
    let ce_count = analysis.counterexample_count();
    if !over_budget {
        match &intruded {
            None => expectations.push(Expectation {
                statement: "a clean circuit checked against its own envelope yields no counterexamples"
                    .into(),
                observed: ce_count == 0,
            }),
            Some(_) => {
                let above: Vec<&DetectionThreshold> = detection
                    .iter()
                    .filter(|d| {
                        d.size.is_some_and(|k| {
                            ic_size(&inp.specs, &d.net, &inp.base, &classes) >= k
                        })
                    })
                    .collect();
                if !above.is_empty() {
                    expectations.push(Expectation {
                        statement: "an intrusion at or above its detection threshold is implicated"
                            .into(),
                        observed: analysis.vulnerable.iter().any(|v| targets.contains(&v.net)),
                    });
                }
                if ce_count > 0 {
                    expectations.push(Expectation {
                        statement: "the most implicated net is an intruded net".into(),
                        observed: analysis
                            .vulnerable
                            .first()
                            .is_some_and(|v| targets.contains(&v.net)),
                    });
                }
            }
        }
    }

    let monitored_paths = paths
        .iter()
        .zip(sys.paths())
        .enumerate()
        .map(|(i, (p, gates))| PathSummary {
            index: i,
            source: inp.base.net(p.source).name.clone(),
            sink: inp.base.net(p.sink).name.clone(),
            nets: gates
                .iter()
                .map(|g| circuit.net(circuit.gate(*g).output).name.clone())
                .collect(),
            clean_nominal_delay: p.delay,
        })
        .collect();
    let intrusions = intruded.as_ref().map_or_else(Vec::new, |ic| {
        ic.applied
            .iter()
            .map(|a| IntrusionSummary {
                spec: a.spec.to_line(),
                net: inp.base.net(a.net).name.clone(),
                net_id: a.net,
                class: classes.get(&a.net).copied(),
                gates: a.gates.len(),
                c_int: ic.c_int.get(&a.net).copied().unwrap_or(0.0),
            })
            .collect()
    });

    let smv = cfg.emit_smv.then(|| export_smv(&sys, Some(&env)));
    let echo_json = serde_json::to_string(&inp.echo).expect("config serializes");
    let report = AnalyzeReport {
        tool: ToolInfo {
            name: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        },
        config_sha256: sha256_hex(echo_json.as_bytes()),
        seed: cfg.seed,
        config: inp.echo,
        circuit: summarize(&inp.original, &inp.base, &inp.nominal)?,
        envelope: EnvelopeSummary {
            mode: if restricted {
                EnvelopeMode::Reachable
            } else {
                EnvelopeMode::Static
            },
            samples: env.sample_count,
            dp_max: env.dp_max,
            lp_max: env.lp_max,
            lp_min: env.lp_min,
            path_delay_max: env.path_delay_max.clone(),
        },
        monitored_paths,
        intrusions,
        transitions_per_run: transitions.to_string(),
        runs: analysis.runs,
        vulnerable: analysis.vulnerable,
        detection,
        qualitative_expectations: expectations,
    };
    Ok(AnalyzeOutcome {
        report,
        exit_code,
        smv,
    })
}

/// Total size of the specs landing on `net`.
fn ic_size(
    specs: &[IntrusionSpec],
    net: &str,
    base: &Circuit,
    classes: &BTreeMap<NetId, LocationClass>,
) -> usize {
    specs
        .iter()
        .filter(|s| {
            crate::intrusion::resolve_target(base, s, classes)
                .is_ok_and(|n| base.net(n).name == net)
        })
        .map(|s| s.size)
        .sum()
}

/// [`analyze`], then writes `report.json`, `report.txt`, `summary.csv`,
/// `run.json` and optionally `model.smv` into `cfg.out`.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<AnalyzeOutcome, PipelineError> {
    let start = Instant::now();
    let outcome = analyze(cfg)?;
    let out = &cfg.out;
    fs::create_dir_all(out).map_err(|source| PipelineError::Io {
        path: out.clone(),
        source,
    })?;
    write(&out.join("report.json"), &outcome.report.to_json())?;
    write(&out.join("report.txt"), &outcome.report.to_text())?;
    write(&out.join("summary.csv"), &outcome.report.to_csv())?;
    if let Some(smv) = &outcome.smv {
        write(&out.join("model.smv"), smv)?;
    }
    let info = RunInfo {
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        wall_seconds: start.elapsed().as_secs_f64(),
        peak_rss_kib: peak_rss_kib(),
        exit_code: outcome.exit_code,
    };
    let mut info_json = serde_json::to_string_pretty(&info).expect("run info serializes");
    info_json.push('\n');
    write(&out.join("run.json"), &info_json)?;
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub run: RunConfig,
    pub class: LocationClass,
    pub mode: IntrusionMode,
    pub kind: CellKind,
    pub sizes: Vec<usize>,
    pub max_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub tool: ToolInfo,
    pub seed: u64,
    pub net: String,
    pub class: LocationClass,
    pub mode: IntrusionMode,
    pub rows: Vec<SweepRow>,
    pub thresholds: Vec<DetectionThreshold>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "size,net,dp,lp,delay,d_dp,d_lp,d_delay,hidden_dp,hidden_lp,hidden_delay\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{},{},{}",
                r.size,
                r.net,
                r.dp,
                r.lp,
                r.delay,
                r.d_dp,
                r.d_lp,
                r.d_delay,
                r.hidden_dp,
                r.hidden_lp,
                r.hidden_delay
            );
        }
        s
    }
}

/// Static effect sweep at the net picked for a location class, plus
/// per-metric detection thresholds. Writes `sweep.csv` and
/// `thresholds.json` into the output directory.
pub fn cmd_sweep(cfg: &SweepConfig) -> Result<SweepReport, PipelineError> {
    let inp = load_inputs(&cfg.run)?;
    let setup = DetectionSetup {
        base: &inp.base,
        nominal: &inp.nominal,
        samples: &inp.samples,
        opts: ModelOptions::default(),
        kind: cfg.kind,
        attach: crate::intrusion::Attachment::Both,
        seed: cfg.run.seed,
    };
    let net = setup.resolve(cfg.class, cfg.mode)?;
    let rows = sweep(&setup, cfg.class, cfg.mode, &cfg.sizes)?;
    let thresholds = cfg
        .run
        .metrics
        .iter()
        .map(|&metric| {
            Ok(DetectionThreshold {
                net: inp.base.net(net).name.clone(),
                mode: cfg.mode,
                metric,
                size: min_detectable_at(&setup, net, cfg.mode, metric, Probe::Static, cfg.max_size)?,
                max_size: cfg.max_size,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let report = SweepReport {
        tool: ToolInfo {
            name: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        },
        seed: cfg.run.seed,
        net: inp.base.net(net).name.clone(),
        class: cfg.class,
        mode: cfg.mode,
        rows,
        thresholds,
    };
    let out = &cfg.run.out;
    fs::create_dir_all(out).map_err(|source| PipelineError::Io {
        path: out.clone(),
        source,
    })?;
    write(&out.join("sweep.csv"), &report.to_csv())?;
    let mut t = serde_json::to_string_pretty(&report.thresholds).expect("thresholds serialize");
    t.push('\n');
    write(&out.join("thresholds.json"), &t)?;
    Ok(report)
}

/// Writes the default technology and variation files into `dir`.
pub fn write_defaults(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let tech = dir.join("tech.txt");
    let var = dir.join("variation.txt");
    write(&tech, &TechnologyParams::nominal_45nm().to_text())?;
    write(&var, &VariationSpec::default().to_text())?;
    Ok(vec![tech, var])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_and_metric_parsing() {
        assert_eq!(PolicyChoice::parse("exhaustive"), Some(PolicyChoice::Exhaustive));
        assert_eq!(
            PolicyChoice::parse("random:7"),
            Some(PolicyChoice::Random { sequences: 7 })
        );
        assert_eq!(PolicyChoice::parse("random:0"), None);
        assert_eq!(PolicyChoice::parse("random"), None);
        assert_eq!(
            parse_metrics("delay,dp"),
            Some(vec![Metric::Dp, Metric::Delay])
        );
        assert_eq!(parse_metrics("dp,x"), None);
    }

    #[test]
    fn parse_summary_of_s27() {
        let s = cmd_parse("builtin:s27").unwrap();
        assert_eq!((s.inputs, s.outputs, s.flipflops), (4, 1, 3));
        assert_eq!(s.gates, 10);
        assert!(s.critical_path_gates > 0 && s.critical_path_delay > 0.0);
    }

    #[test]
    fn clean_run_has_no_counterexamples() {
        let dir = std::env::temp_dir();
        let mut cfg = RunConfig::new("builtin:s27", &dir);
        cfg.bound = 2;
        let out = analyze(&cfg).unwrap();
        assert_eq!(out.exit_code, 0);
        assert_eq!(out.report.counterexample_count(), 0);
        assert!(out.report.qualitative_expectations.iter().all(|q| q.observed));
    }

    #[test]
    fn over_budget_reports_unknown() {
        let mut cfg = RunConfig::new("builtin:s27", &std::env::temp_dir());
        cfg.budget = 10;
        let out = analyze(&cfg).unwrap();
        assert_eq!(out.exit_code, 3);
        assert!(out.report.runs.iter().all(|r| r.verdict == "UNKNOWN_BUDGET"));
    }

    #[test]
    fn structural_errors_are_invariant_violations() {
        assert_eq!(netlist_exit_code(&NetlistError::Undriven("x".into())), 2);
        assert_eq!(
            netlist_exit_code(&NetlistError::Syntax {
                line: 1,
                column: 1,
                message: String::new()
            }),
            1
        );
    }

    #[test]
    fn intrusion_above_threshold_is_implicated() {
        let d = tempfile::tempdir().unwrap();
        let spec = d.path().join("intrude.txt");
        let mut cfg = RunConfig::new("builtin:s27", d.path());
        cfg.metrics = vec![Metric::Dp];
        cfg.intrude = Some(spec.clone());
        fs::write(&spec, "net:G15 parallel 1\n").unwrap();
        let probe = analyze(&cfg).unwrap().report;
        let k = probe.detection[0].size.expect("finite threshold");
        fs::write(&spec, format!("net:G15 parallel {k}\n")).unwrap();
        let r = analyze(&cfg).unwrap().report;
        assert!(r.counterexample_count() > 0);
        assert_eq!(r.vulnerable[0].name, "G15");
        if k > 1 {
            fs::write(&spec, format!("net:G15 parallel {}\n", k - 1)).unwrap();
            assert_eq!(analyze(&cfg).unwrap().report.counterexample_count(), 0);
        }
    }

    #[test]
    fn files_are_written_and_reports_repeat() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new("builtin:s27", a.path());
        cfg.emit_smv = true;
        cmd_analyze(&cfg).unwrap();
        cfg.out = b.path().to_path_buf();
        cmd_analyze(&cfg).unwrap();
        for f in ["report.json", "report.txt", "summary.csv", "model.smv"] {
            let x = fs::read(a.path().join(f)).unwrap();
            assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let info: RunInfo =
            serde_json::from_str(&fs::read_to_string(a.path().join("run.json")).unwrap()).unwrap();
        assert_eq!(info.exit_code, 0);
    }
}

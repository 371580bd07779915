// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use trojanbmc::checker::Strategy;
use trojanbmc::intrusion::IntrusionMode;
use trojanbmc::netlist::{decompose_universal, CellKind, LocationClass};
use trojanbmc::pipeline::{
    self, budget_from_env, parse_metrics, EnvelopeMode, PipelineError, PolicyChoice, RunConfig,
    SweepConfig,
};
use trojanbmc::sidechannel::{profile_csv, CircuitModel, ModelOptions};
use trojanbmc::statespace::{estimate_coverage, Metric};

#[derive(Parser)]
#[command(name = "trojanbmc", version, about = "Side-channel bound checking for gate-level sequential circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural summary of a netlist.
    Parse {
        /// `.bench` file or `builtin:NAME`.
        netlist: String,
        #[arg(long)]
        json: bool,
    },
    /// Envelope, optional intrusion, bounded exploration and iterative
    /// property checking; writes report files.
    Analyze(AnalyzeArgs),
    /// Patterns and time needed for exhaustive testing.
    Coverage {
        #[arg(long, required_unless_present = "netlist")]
        inputs: Option<u32>,
        #[arg(long)]
        gates: Option<u32>,
        #[arg(long)]
        nodes: Option<u32>,
        /// Take input, gate and net counts from a netlist.
        #[arg(long, conflicts_with = "inputs")]
        netlist: Option<String>,
        /// Tests per second.
        #[arg(long, default_value_t = 10.0)]
        rate: f64,
        #[arg(long)]
        json: bool,
    },
    /// Intrusion-size effect sweep and detection thresholds at one
    /// location class.
    Sweep(SweepArgs),
    /// Per-gate power and delay tables as CSV.
    Profile {
        #[arg(long)]
        netlist: String,
        #[arg(long)]
        tech: Option<PathBuf>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes the default technology and variation files.
    EmitDefaults {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// `.bench` file or `builtin:NAME`.
    #[arg(long)]
    netlist: String,
    #[arg(long)]
    tech: Option<PathBuf>,
    #[arg(long)]
    variation: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "dp,lp,delay", value_parser = metrics_arg)]
    metrics: MetricList,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Intrusion spec file.
    #[arg(long)]
    intrude: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    bound: usize,
    /// `exhaustive` or `random:N`.
    #[arg(long, default_value = "exhaustive", value_parser = policy_arg)]
    policy: PolicyChoice,
    #[arg(long)]
    emit_smv: bool,
    #[arg(long, default_value_t = 10_000)]
    max_iterations: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::Incremental)]
    strategy: StrategyArg,
    #[arg(long, value_enum, default_value_t = EnvelopeArg::Reachable)]
    envelope: EnvelopeArg,
    /// Longest clean paths monitored for delay.
    #[arg(long, default_value_t = 4)]
    paths: usize,
    /// Largest intrusion size tried for detection thresholds (0 skips).
    #[arg(long, default_value_t = 64)]
    detect_max: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// INPUT, OUTPUT, FEEDBACK, CP or NCP.
    #[arg(long, value_parser = class_arg)]
    class: LocationClass,
    #[arg(long, value_enum, default_value_t = ModeArg::Parallel)]
    mode: ModeArg,
    #[arg(long, default_value = "NAND2", value_parser = cell_arg)]
    kind: CellKind,
    /// Sizes as `A..=B` or a comma list.
    #[arg(long, default_value = "0..=16", value_parser = sizes_arg)]
    sizes: SizeList,
    #[arg(long, default_value_t = 256)]
    max_size: usize,
}

#[derive(Copy, Clone, ValueEnum)]
enum StrategyArg {
    Incremental,
    Restart,
}

#[derive(Copy, Clone, ValueEnum)]
enum EnvelopeArg {
    Static,
    Reachable,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Parallel,
    Series,
}

#[derive(Clone)]
struct SizeList(Vec<usize>);

#[derive(Clone)]
struct MetricList(Vec<Metric>);

fn metrics_arg(s: &str) -> Result<MetricList, String> {
    parse_metrics(s)
        .map(MetricList)
        .ok_or_else(|| format!("expected a list of dp, lp, delay; got `{s}`"))
}

fn policy_arg(s: &str) -> Result<PolicyChoice, String> {
    PolicyChoice::parse(s).ok_or_else(|| format!("expected `exhaustive` or `random:N`; got `{s}`"))
}

fn class_arg(s: &str) -> Result<LocationClass, String> {
    LocationClass::from_name(s).ok_or_else(|| format!("unknown location class `{s}`"))
}

fn cell_arg(s: &str) -> Result<CellKind, String> {
    CellKind::from_name(s).ok_or_else(|| format!("unknown cell `{s}` (NAND2, NOR2, NOT)"))
}

fn sizes_arg(s: &str) -> Result<SizeList, String> {
    let bad = || format!("expected `A..=B` or `a,b,c`; got `{s}`");
    if let Some((a, b)) = s.split_once("..=") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok(SizeList((a..=b).collect()));
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()
        .map(SizeList)
}

impl CommonArgs {
    fn config(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = RunConfig::new(&self.netlist, &self.out);
        cfg.tech.clone_from(&self.tech);
        cfg.variation.clone_from(&self.variation);
        cfg.seed = self.seed;
        cfg.metrics.clone_from(&self.metrics.0);
        cfg.budget = budget_from_env()?;
        Ok(cfg)
    }
}

fn analyze(a: &AnalyzeArgs) -> Result<i32, PipelineError> {
    let mut cfg = a.common.config()?;
    cfg.intrude.clone_from(&a.intrude);
    cfg.bound = a.bound;
    cfg.policy = a.policy;
    cfg.emit_smv = a.emit_smv;
    cfg.max_iterations = a.max_iterations;
    cfg.strategy = match a.strategy {
        StrategyArg::Incremental => Strategy::Incremental,
        StrategyArg::Restart => Strategy::Restart,
    };
    cfg.envelope = match a.envelope {
        EnvelopeArg::Static => EnvelopeMode::Static,
        EnvelopeArg::Reachable => EnvelopeMode::Reachable,
    };
    cfg.top_paths = a.paths;
    cfg.detect_max = a.detect_max;
    let outcome = pipeline::cmd_analyze(&cfg)?;
    print!("{}", outcome.report.to_text());
    println!("reports written to {}", cfg.out.display());
    if outcome.exit_code == 3 {
        eprintln!("error: exploration budget exceeded; verdicts are UNKNOWN_BUDGET");
    }
    Ok(outcome.exit_code)
}

fn sweep(a: &SweepArgs) -> Result<i32, PipelineError> {
    let cfg = SweepConfig {
        run: a.common.config()?,
        class: a.class,
        mode: match a.mode {
            ModeArg::Parallel => IntrusionMode::Parallel,
            ModeArg::Series => IntrusionMode::Series,
        },
        kind: a.kind,
        sizes: a.sizes.0.clone(),
        max_size: a.max_size,
    };
    let r = pipeline::cmd_sweep(&cfg)?;
    print!("{}", r.to_csv());
    for t in &r.thresholds {
        let size = t.size.map_or_else(|| "NOT-FOUND".to_string(), |k| k.to_string());
        println!("min detectable {} at {}: {}", t.metric.name(), t.net, size);
    }
    Ok(0)
}

fn coverage(
    inputs: Option<u32>,
    gates: Option<u32>,
    nodes: Option<u32>,
    netlist: Option<&str>,
    rate: f64,
    json: bool,
) -> Result<i32, PipelineError> {
    let (inputs, gates, nodes) = match netlist {
        Some(n) => {
            let c = pipeline::load_netlist(n)?;
            let count = |x: usize| u32::try_from(x).unwrap_or(u32::MAX);
            (
                count(c.primary_inputs().len()),
                Some(count(c.gates().len())),
                Some(count(c.nets().len())),
            )
        }
        None => (inputs.unwrap_or(0), gates, nodes),
    };
    let r = estimate_coverage(inputs, gates, nodes, rate)
        .ok_or_else(|| PipelineError::Config(format!("rate must be positive, got {rate}")))?;
    if json {
        println!("{}", serde_json_string(&r));
    } else {
        println!("{:<7} {:>5} {:>30} {:>30} {:>14}", "basis", "n", "patterns", "seconds", "years");
        for row in &r.rows {
            let patterns = if row.patterns.len() > 30 {
                format!("2^{}", row.exponent)
            } else {
                row.patterns.clone()
            };
            println!(
                "{:<7} {:>5} {:>30} {:>30} {:>14.4e}",
                row.basis, row.exponent, patterns, row.seconds, row.years
            );
        }
    }
    Ok(0)
}

fn serde_json_string<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn parse(netlist: &str, json: bool) -> Result<i32, PipelineError> {
    let s = pipeline::cmd_parse(netlist)?;
    if json {
        println!("{}", serde_json_string(&s));
        return Ok(0);
    }
    println!("circuit {}", s.name);
    println!("inputs {}", s.inputs);
    println!("outputs {}", s.outputs);
    println!("flip-flops {}", s.flipflops);
    println!("gates {}", s.gates);
    for (k, n) in &s.histogram {
        println!("  {k} {n}");
    }
    println!("decomposed gates {}", s.decomposed_gates);
    for (k, n) in &s.decomposed_histogram {
        println!("  {k} {n}");
    }
    println!(
        "critical path {} gates, {:.6e} s",
        s.critical_path_gates, s.critical_path_delay
    );
    Ok(0)
}

fn profile(netlist: &str, tech: Option<&std::path::Path>, out: Option<&std::path::Path>) -> Result<i32, PipelineError> {
    let c = pipeline::load_netlist(netlist)?;
    let d = decompose_universal(&c).map_err(|source| PipelineError::Netlist {
        context: netlist.to_string(),
        source,
    })?;
    let p = pipeline::load_tech(tech)?;
    let m = CircuitModel::new(&d, &p, &ModelOptions::default())?;
    let csv = profile_csv(&d, &m);
    match out {
        Some(path) => std::fs::write(path, csv).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<i32, PipelineError> {
    match cli.command {
        Command::Parse { netlist, json } => parse(&netlist, json),
        Command::Analyze(a) => analyze(&a),
        Command::Coverage {
            inputs,
            gates,
            nodes,
            netlist,
            rate,
            json,
        } => coverage(inputs, gates, nodes, netlist.as_deref(), rate, json),
        Command::Sweep(a) => sweep(&a),
        Command::Profile { netlist, tech, out } => profile(&netlist, tech.as_deref(), out.as_deref()),
        Command::EmitDefaults { out } => {
            for p in pipeline::write_defaults(&out)? {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    // Usage errors are input errors (1); 2 is reserved for invariant
    // violations.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

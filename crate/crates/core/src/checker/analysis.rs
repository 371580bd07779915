// SPDX-License-Identifier: Apache-2.0

//! Iterative counterexample extraction with exceptions.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    complement, next_violation, BoundMetric, BoundProperty, Counterexample, Reference,
    TransitionPattern,
};
use crate::netlist::NetId;
use crate::sidechannel::BoundEnvelope;
use crate::statespace::{ExploreConfig, ExploreError, Explorer, Metric, TransitionSystem};

/// How the loop resumes after a counterexample is turned into an exception.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Continue the same exploration past the excepted transition.
    Incremental,
    /// Start a fresh exploration from reset.
    Restart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub explore: ExploreConfig,
    pub metrics: Vec<Metric>,
    pub max_iterations: usize,
    pub strategy: Strategy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyRun {
    pub metric: BoundMetric,
    /// Universal form checked on the last iteration.
    pub property: String,
    /// Existential form whose witnesses are the counterexamples.
    pub complement: String,
    pub verdict: String,
    pub counterexamples: Vec<Counterexample>,
    pub iterations: usize,
    /// Transitions evaluated across all iterations.
    pub evaluations: u64,
    pub truncated: bool,
    pub exceptions: Vec<TransitionPattern>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedNet {
    pub net: NetId,
    pub name: String,
    pub count: usize,
    pub max_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub runs: Vec<PropertyRun>,
    pub vulnerable: Vec<RankedNet>,
}

impl AnalysisReport {
    pub fn counterexample_count(&self) -> usize {
        self.runs.iter().map(|r| r.counterexamples.len()).sum()
    }

    pub fn counterexamples(&self) -> impl Iterator<Item = &Counterexample> {
        self.runs.iter().flat_map(|r| r.counterexamples.iter())
    }
}

fn properties(metrics: &[Metric], paths: usize) -> Vec<BoundMetric> {
    let mut out = Vec::new();
    for m in metrics {
        match m {
            Metric::Dp => out.push(BoundMetric::Dp),
            Metric::Lp => {
                out.push(BoundMetric::LpUpper);
                out.push(BoundMetric::LpLower);
            }
            Metric::Delay => out.extend((0..paths).map(BoundMetric::Delay)),
        }
    }
    out.sort();
    out.dedup();
    out
}

fn run_property(
    sys: &TransitionSystem,
    env: &BoundEnvelope,
    metric: BoundMetric,
    cfg: &AnalysisConfig,
    reference: &Reference,
) -> Result<PropertyRun, ExploreError> {
    let explore = ExploreConfig {
        mask: metric.mask(),
        ..cfg.explore
    };
    let mut prop = BoundProperty::within_bound(metric, env);
    let mut ces = Vec::new();
    let mut iterations = 0;
    let mut evaluations = 0;
    let mut truncated = false;
    let mut ex = Explorer::new(sys, explore)?;
    let mut verdict = "HOLDS_WITHIN_BOUND";
    loop {
        if iterations == cfg.max_iterations {
            truncated = true;
            verdict = "TRUNCATED";
            break;
        }
        iterations += 1;
        if cfg.strategy == Strategy::Restart {
            evaluations += ex.evaluations();
            ex = Explorer::new(sys, explore)?;
        }
        match next_violation(&mut ex, &prop, reference) {
            Some(ce) => {
                prop.exceptions.insert(ce.pattern.clone());
                ces.push(ce);
            }
            None => break,
        }
    }
    evaluations += ex.evaluations();
    if !ces.is_empty() && !truncated {
        verdict = "HOLDS_WITH_EXCEPTIONS";
    }
    Ok(PropertyRun {
        metric,
        property: prop.render(),
        complement: complement(&prop).render(),
        verdict: verdict.to_string(),
        counterexamples: ces,
        iterations,
        evaluations,
        truncated,
        exceptions: prop.exceptions.into_iter().collect(),
    })
}

/// Per metric: check, turn each counterexample into an exception and
/// re-check until the property holds or `max_iterations` is reached.
pub fn vulnerability_analysis(
    sys: &TransitionSystem,
    env: &BoundEnvelope,
    cfg: &AnalysisConfig,
    reference: &Reference,
) -> Result<AnalysisReport, ExploreError> {
    let metrics = properties(&cfg.metrics, sys.paths().len());
    let runs = metrics
        .par_iter()
        .map(|&m| run_property(sys, env, m, cfg, reference))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = AnalysisReport {
        runs,
        vulnerable: Vec::new(),
    };
    report.vulnerable = rank_vulnerable(&report, sys.circuit());
    Ok(report)
}

/// Nets by implication count, then largest excess, then id.
pub fn rank_vulnerable(report: &AnalysisReport, c: &crate::netlist::Circuit) -> Vec<RankedNet> {
    let mut acc: BTreeMap<NetId, (usize, f64)> = BTreeMap::new();
    for ce in report.counterexamples() {
        for &n in &ce.implicated {
            let e = acc.entry(n).or_insert((0, f64::NEG_INFINITY));
            e.0 += 1;
            e.1 = e.1.max(ce.excess);
        }
    }
    let mut out: Vec<RankedNet> = acc
        .into_iter()
        .map(|(net, (count, max_excess))| RankedNet {
            net,
            name: c.net(net).name.clone(),
            count,
            max_excess,
        })
        .collect();
    out.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(b.max_excess.total_cmp(&a.max_excess))
            .then(a.net.cmp(&b.net))
    });
    out
}

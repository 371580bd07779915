// SPDX-License-Identifier: Apache-2.0

use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Bits, ExploreError, MetricMask, MetricValuation, TransitionSystem};

/// Default cap on transitions visited by one exhaustive exploration.
pub const DEFAULT_BUDGET: u128 = 1 << 32;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputPolicy {
    Exhaustive,
    Random { seed: u64, sequences: usize },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreConfig {
    pub bound: usize,
    pub policy: InputPolicy,
    pub budget: u128,
    pub mask: MetricMask,
}

impl ExploreConfig {
    pub fn exhaustive(bound: usize) -> Self {
        ExploreConfig {
            bound,
            policy: InputPolicy::Exhaustive,
            budget: DEFAULT_BUDGET,
            mask: MetricMask::ALL,
        }
    }

    /// Transitions this configuration visits on a system with `inputs`
    /// primary inputs. Saturates at `u128::MAX`.
    pub fn transitions(&self, inputs: usize) -> u128 {
        match self.policy {
            InputPolicy::Exhaustive => exhaustive_transitions(inputs, self.bound),
            InputPolicy::Random { sequences, .. } => {
                (sequences as u128).saturating_mul(self.bound as u128)
            }
        }
    }
}

/// Σ_{t=1..bound} 2^(inputs·t), saturating.
pub fn exhaustive_transitions(inputs: usize, bound: usize) -> u128 {
    let mut total: u128 = 0;
    for t in 1..=bound {
        let e = inputs.saturating_mul(t);
        if e >= 128 {
            return u128::MAX;
        }
        total = total.saturating_add(1u128 << e);
    }
    total
}

/// One visited transition. `depth` is 1 for the first move out of reset.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub depth: usize,
    /// Index of the random sequence; 0 for exhaustive exploration.
    pub sequence: usize,
    pub prev_state: Bits,
    pub prev_input: Bits,
    pub input: Bits,
    pub state: Bits,
    pub valuation: MetricValuation,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreStats {
    pub transitions: u64,
    pub completed: bool,
}

struct Frame {
    values: Vec<bool>,
    state: Bits,
    input: Bits,
    next: u64,
}

struct RandomWalk {
    seed: u64,
    sequences: usize,
    sequence: usize,
    rng: ChaCha8Rng,
}

/// Resumable depth-first walk over input sequences. Exhaustive order is
/// lexicographic over input sequences with prefixes first.
pub struct Explorer<'s> {
    sys: &'s TransitionSystem,
    cfg: ExploreConfig,
    frames: Vec<Frame>,
    depth: usize,
    random: Option<RandomWalk>,
    evaluations: u64,
    scratch: Vec<bool>,
}

fn walk_rng(seed: u64, sequence: usize) -> ChaCha8Rng {
    let mut s = ChaCha8Rng::seed_from_u64(seed);
    let mut key = [0u8; 32];
    s.fill(&mut key[..]);
    key[..8]
        .iter_mut()
        .zip((sequence as u64).to_le_bytes())
        .for_each(|(k, b)| *k ^= b);
    ChaCha8Rng::from_seed(key)
}

impl<'s> Explorer<'s> {
    pub fn new(sys: &'s TransitionSystem, cfg: ExploreConfig) -> Result<Self, ExploreError> {
        if cfg.bound == 0 {
            return Err(ExploreError::ZeroBound);
        }
        let required = cfg.transitions(sys.input_width());
        if matches!(cfg.policy, InputPolicy::Exhaustive) && required > cfg.budget {
            return Err(ExploreError::BudgetExceeded {
                required,
                budget: cfg.budget,
            });
        }
        let root_input = Bits::zeros(sys.input_width());
        let root_state = sys.reset_state().clone();
        let values = sys.settle(&root_state, &root_input);
        let frames = (0..=cfg.bound)
            .map(|d| Frame {
                values: if d == 0 { values.clone() } else { Vec::new() },
                state: root_state.clone(),
                input: root_input.clone(),
                next: 0,
            })
            .collect();
        let random = match cfg.policy {
            InputPolicy::Exhaustive => None,
            InputPolicy::Random { seed, sequences } => Some(RandomWalk {
                seed,
                sequences,
                sequence: 0,
                rng: walk_rng(seed, 0),
            }),
        };
        Ok(Explorer {
            sys,
            cfg,
            frames,
            depth: 0,
            random,
            evaluations: 0,
            scratch: Vec::new(),
        })
    }

    pub fn system(&self) -> &TransitionSystem {
        self.sys
    }

    /// Transitions evaluated so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Settled values before and after the last returned step.
    pub fn last_values(&self) -> (&[bool], &[bool]) {
        (
            &self.frames[self.depth - 1].values,
            &self.frames[self.depth].values,
        )
    }

    /// Input sequence leading to the last returned step, from step 1.
    pub fn last_inputs(&self) -> Vec<Bits> {
        self.frames[1..=self.depth]
            .iter()
            .map(|f| f.input.clone())
            .collect()
    }

    fn descend(&mut self, input: Bits, sequence: usize) -> Step {
        let d = self.depth;
        let next_state = self.sys.next_state(&self.frames[d].values);
        let mut buf = std::mem::take(&mut self.scratch);
        self.sys.settle_into(&next_state, &input, &mut buf);
        let valuation = self.sys.valuation(&self.frames[d].values, &buf, self.cfg.mask);
        let child = &mut self.frames[d + 1];
        self.scratch = std::mem::replace(&mut child.values, buf);
        child.state = next_state.clone();
        child.input = input.clone();
        child.next = 0;
        self.depth = d + 1;
        self.evaluations += 1;
        Step {
            depth: d + 1,
            sequence,
            prev_state: self.frames[d].state.clone(),
            prev_input: self.frames[d].input.clone(),
            input,
            state: next_state,
            valuation,
        }
    }

    fn next_exhaustive(&mut self) -> Option<Step> {
        let width = self.sys.input_width();
        let fan = 1u64.checked_shl(width as u32).unwrap_or(0);
        loop {
            let top = &mut self.frames[self.depth];
            if self.depth < self.cfg.bound && top.next < fan {
                let input = Bits::from_counter(top.next, width);
                top.next += 1;
                return Some(self.descend(input, 0));
            }
            if self.depth == 0 {
                return None;
            }
            self.depth -= 1;
        }
    }

    fn next_random(&mut self) -> Option<Step> {
        let width = self.sys.input_width();
        let walk = self.random.as_mut().expect("random policy");
        if self.depth == self.cfg.bound {
            self.depth = 0;
            walk.sequence += 1;
            walk.rng = walk_rng(walk.seed, walk.sequence);
        }
        if walk.sequence >= walk.sequences {
            return None;
        }
        let input = Bits::from_fn(width, |_| walk.rng.random::<bool>());
        let seq = walk.sequence;
        Some(self.descend(input, seq))
    }

    pub fn next_step(&mut self) -> Option<Step> {
        if self.random.is_some() {
            self.next_random()
        } else {
            self.next_exhaustive()
        }
    }
}

/// Visits every transition in order until the visitor breaks.
pub fn explore(
    sys: &TransitionSystem,
    cfg: ExploreConfig,
    mut visitor: impl FnMut(&Step) -> ControlFlow<()>,
) -> Result<ExploreStats, ExploreError> {
    let mut ex = Explorer::new(sys, cfg)?;
    while let Some(step) = ex.next_step() {
        if visitor(&step).is_break() {
            return Ok(ExploreStats {
                transitions: ex.evaluations(),
                completed: false,
            });
        }
    }
    Ok(ExploreStats {
        transitions: ex.evaluations(),
        completed: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;
    use crate::sidechannel::{CircuitModel, ModelOptions};
    use crate::techmodel::TechnologyParams;

    fn sys(text: &str) -> TransitionSystem {
        let c = parse_bench("t", text).unwrap();
        let m = CircuitModel::new(&c, &TechnologyParams::nominal_45nm(), &ModelOptions::default())
            .unwrap();
        TransitionSystem::build(&c, m, vec![]).unwrap()
    }

    #[test]
    fn two_inputs_one_step() {
        let s = sys("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NAND(a, b)\n");
        let st = explore(&s, ExploreConfig::exhaustive(1), |_| ControlFlow::Continue(())).unwrap();
        assert_eq!(st.transitions, 4);
        assert!(st.completed);
    }

    #[test]
    fn counts_match_formula() {
        let s = sys("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NAND(a, b)\n");
        for b in 1..=4 {
            let st =
                explore(&s, ExploreConfig::exhaustive(b), |_| ControlFlow::Continue(())).unwrap();
            assert_eq!(st.transitions as u128, exhaustive_transitions(2, b));
        }
    }

    #[test]
    fn prefix_order() {
        let s = sys("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n");
        let mut seen = vec![];
        explore(&s, ExploreConfig::exhaustive(2), |st| {
            seen.push((st.depth, st.input.to_string()));
            ControlFlow::Continue(())
        })
        .unwrap();
        let expect: Vec<(usize, String)> = [(1, "0"), (2, "0"), (2, "1"), (1, "1"), (2, "0"), (2, "1")]
            .iter()
            .map(|(d, s)| (*d, s.to_string()))
            .collect();
        assert_eq!(seen, expect);
    }

    #[test]
    fn budget_and_early_stop() {
        let s = sys("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n");
        let mut cfg = ExploreConfig::exhaustive(3);
        cfg.budget = 13;
        assert!(matches!(
            Explorer::new(&s, cfg),
            Err(ExploreError::BudgetExceeded { required: 14, .. })
        ));
        cfg.budget = 14;
        let st = explore(&s, cfg, |st| {
            if st.depth == 3 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert_eq!(st.transitions, 3);
        assert!(!st.completed);
        cfg.bound = 0;
        assert!(Explorer::new(&s, cfg).is_err());
    }

    #[test]
    fn random_repeats() {
        let s = sys("INPUT(a)\nINPUT(b)\nOUTPUT(q)\nq = DFF(y)\ny = NOR(a, q)\n");
        let cfg = ExploreConfig {
            policy: InputPolicy::Random {
                seed: 5,
                sequences: 7,
            },
            ..ExploreConfig::exhaustive(6)
        };
        let run = || {
            let mut v = vec![];
            explore(&s, cfg, |st| {
                v.push(st.clone());
                ControlFlow::Continue(())
            })
            .unwrap();
            v
        };
        let a = run();
        assert_eq!(a.len(), 42);
        assert_eq!(a, run());
    }
}

//! Monte-Carlo policy rollouts: repeated seeded runs from the initial
//! states, summarized by average accumulated reward. Each run draws its own
//! ChaCha8 stream, so the run count or evaluation order never changes
//! individual runs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::action::{ground_apply, StochasticAction};
use crate::domain::{DomainSpec, ProblemSpec};
use crate::error::{Error, Result};
use crate::matching::{match_exists, match_into};
use crate::term::{GroundState, Substitution};
use crate::value::Policy;

/// Pinned generator name, reported in summaries for reproducibility.
pub const RNG_NAME: &str = "chacha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Goal,
    DeadEnd,
    StepCap,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub steps: usize,
    pub terminal: Terminal,
    /// Goal reward (when reached) plus the accumulated action costs.
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct SimSummary {
    pub runs: usize,
    pub mean: f64,
    pub stdev: f64,
    pub min: f64,
    pub max: f64,
    pub goals: usize,
    pub dead_ends: usize,
    pub capped: usize,
    pub mean_steps: f64,
    pub seed: u64,
    pub rng: &'static str,
}

impl std::fmt::Display for SimSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "runs={}", self.runs)?;
        writeln!(f, "mean_reward={}", self.mean)?;
        writeln!(f, "stdev_reward={}", self.stdev)?;
        writeln!(f, "min_reward={}", self.min)?;
        writeln!(f, "max_reward={}", self.max)?;
        writeln!(f, "goals={}", self.goals)?;
        writeln!(f, "dead_ends={}", self.dead_ends)?;
        writeln!(f, "capped={}", self.capped)?;
        writeln!(f, "mean_steps={}", self.mean_steps)?;
        writeln!(f, "rng={}", self.rng)?;
        writeln!(f, "seed={}", self.seed)
    }
}

/// Find a ground instantiation of the policy entry's action at `d`:
/// complete the entry's substitution against the positive precondition and
/// check the negated preconditions.
fn ground_instantiation(
    d: &GroundState,
    action: &StochasticAction,
    theta: &Substitution,
) -> Option<Substitution> {
    let pre = action.pre().apply(theta);
    let target = d.to_term();
    for ext in match_into(&pre.positive, &target) {
        let full = theta.compose(&ext);
        let pre_full = action.pre().apply(&full);
        if !pre_full.positive.is_ground() {
            continue;
        }
        let ok = pre_full
            .negations
            .iter()
            .all(|np| !match_exists(np, &target));
        if ok {
            return Some(full);
        }
    }
    None
}

/// Run `runs` independent rollouts of `policy` from the problem's initial
/// states (cycling through them when there are several). Each step looks up
/// the covering policy entry, samples a nature's choice, and applies it;
/// runs stop at absorbing goal states (adding the goal reward), at dead
/// ends, or at the step cap.
pub fn simulate_records(
    policy: &Policy,
    problem: &ProblemSpec,
    dom: &DomainSpec,
    runs: usize,
    cap: usize,
    seed: u64,
) -> Result<Vec<RunRecord>> {
    if problem.initial_states.is_empty() {
        return Err(Error::validation("no initial states".to_string()));
    }
    let mut records = Vec::with_capacity(runs);
    for run_idx in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run_idx as u64);
        let mut d = problem.initial_states[run_idx % problem.initial_states.len()].clone();
        let mut reward = 0.0;
        let mut steps = 0;
        let terminal = loop {
            if let Some(rule) = dom.reward.matching_rule_ground(&d) {
                if rule.absorbing {
                    reward += rule.value;
                    break Terminal::Goal;
                }
            }
            if steps >= cap {
                break Terminal::StepCap;
            }
            let Some(entry) = policy.lookup_ground(&d) else {
                break Terminal::DeadEnd;
            };
            let Some(action) = dom.action(&entry.action) else {
                break Terminal::DeadEnd;
            };
            let Some(theta) = ground_instantiation(&d, action, &entry.theta) else {
                break Terminal::DeadEnd;
            };
            let draw: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = action.choices.last().expect("validated nonempty");
            for choice in &action.choices {
                acc += choice.prob;
                if draw < acc {
                    chosen = choice;
                    break;
                }
            }
            match ground_apply(&d, chosen, &theta) {
                Ok(next) => d = next,
                Err(_) => break Terminal::DeadEnd,
            }
            reward += action.cost;
            steps += 1;
        };
        records.push(RunRecord {
            steps,
            terminal,
            reward,
        });
    }
    Ok(records)
}

pub fn simulate(
    policy: &Policy,
    problem: &ProblemSpec,
    dom: &DomainSpec,
    runs: usize,
    cap: usize,
    seed: u64,
) -> Result<SimSummary> {
    let records = simulate_records(policy, problem, dom, runs, cap, seed)?;
    Ok(summarize(&records, seed))
}

pub fn summarize(records: &[RunRecord], seed: u64) -> SimSummary {
    let n = records.len();
    let mean = if n == 0 {
        0.0
    } else {
        records.iter().map(|r| r.reward).sum::<f64>() / n as f64
    };
    let stdev = if n > 1 {
        (records
            .iter()
            .map(|r| (r.reward - mean).powi(2))
            .sum::<f64>()
            / (n - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    SimSummary {
        runs: n,
        mean,
        stdev,
        min: records.iter().map(|r| r.reward).fold(f64::INFINITY, f64::min),
        max: records
            .iter()
            .map(|r| r.reward)
            .fold(f64::NEG_INFINITY, f64::max),
        goals: records
            .iter()
            .filter(|r| r.terminal == Terminal::Goal)
            .count(),
        dead_ends: records
            .iter()
            .filter(|r| r.terminal == Terminal::DeadEnd)
            .count(),
        capped: records
            .iter()
            .filter(|r| r.terminal == Terminal::StepCap)
            .count(),
        mean_steps: if n == 0 {
            0.0
        } else {
            records.iter().map(|r| r.steps as f64).sum::<f64>() / n as f64
        },
        seed,
        rng: RNG_NAME,
    }
}

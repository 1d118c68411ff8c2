//! LAO*-style heuristic search over abstract states: policy expansion by
//! reachability from the initial states, admissible heuristic construction
//! by goal regression, and the outer loop alternating expansion with value
//! iteration on the visited envelope.

use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use crate::action::{backward_applicable, forward_applicable, predecessor, successor};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::fovia::{backup, fovia_loop, TransitionTable};
use crate::state::CNState;
use crate::term::GroundState;
use crate::value::{Policy, PolicyEntry, ValueFunction};

/// Cap on states generated by heuristic regression sweeps.
const HEURISTIC_STATE_CAP: usize = 20_000;
/// Cap on abstract states the exhaustive expansion may enumerate.
const ABSTRACT_STATE_BOUND: usize = 200_000;

#[derive(Debug, Clone)]
pub struct SolveConfig {
    /// Convergence threshold on the value-iteration residual.
    pub epsilon: f64,
    /// Discount override; defaults to the domain's gamma.
    pub gamma: Option<f64>,
    /// Regression sweeps used to build the admissible heuristic.
    pub heuristic_sweeps: usize,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
}

impl Default for SolveConfig {
    fn default() -> SolveConfig {
        SolveConfig {
            epsilon: 1e-4,
            gamma: None,
            heuristic_sweeps: 5,
            max_outer_iters: 100,
            max_inner_iters: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveStats {
    pub solver: &'static str,
    pub converged: bool,
    /// Abstract states expanded by the search.
    pub abstract_states: usize,
    pub outer_iterations: usize,
    pub fovia_sweeps: usize,
    pub q_evaluations: usize,
    pub heuristic_entries: usize,
    pub dead_ends: usize,
    pub residual: f64,
    pub epsilon: f64,
    pub gamma: f64,
    /// |F| per outer iteration.
    pub expansion_sizes: Vec<usize>,
    /// |E| per outer iteration.
    pub envelope_sizes: Vec<usize>,
    pub value_entries: usize,
    pub policy_entries: usize,
    pub wall_ms: u128,
}

impl fmt::Display for SolveStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &Vec<usize>| {
            v.iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        writeln!(f, "solver={}", self.solver)?;
        writeln!(f, "converged={}", self.converged)?;
        writeln!(f, "abstract_states={}", self.abstract_states)?;
        writeln!(f, "outer_iterations={}", self.outer_iterations)?;
        writeln!(f, "fovia_sweeps={}", self.fovia_sweeps)?;
        writeln!(f, "q_evaluations={}", self.q_evaluations)?;
        writeln!(f, "heuristic_entries={}", self.heuristic_entries)?;
        writeln!(f, "dead_ends={}", self.dead_ends)?;
        writeln!(f, "residual={:e}", self.residual)?;
        writeln!(f, "epsilon={:e}", self.epsilon)?;
        writeln!(f, "gamma={}", self.gamma)?;
        writeln!(f, "expansion_sizes={}", join(&self.expansion_sizes))?;
        writeln!(f, "envelope_sizes={}", join(&self.envelope_sizes))?;
        writeln!(f, "value_entries={}", self.value_entries)?;
        writeln!(f, "policy_entries={}", self.policy_entries)?;
        writeln!(f, "wall_ms={}", self.wall_ms)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub values: ValueFunction,
    pub policy: Policy,
    /// Final set of expanded abstract states (G).
    pub envelope: BTreeSet<CNState>,
    pub stats: SolveStats,
}

/// Lift ground initial states to canonical abstract states (positive part
/// only), deduplicated, order preserved.
pub fn abstract_initial_states(s0: &[GroundState]) -> Vec<CNState> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for d in s0 {
        let z = CNState::lift(d).canonical();
        if seen.insert(z.clone()) {
            out.push(z);
        }
    }
    out
}

/// The arbitrary initial policy choice: first action in declaration order
/// that applies, with the least substitution.
fn initial_policy_entry(z: &CNState, dom: &DomainSpec) -> Option<PolicyEntry> {
    for action in &dom.actions {
        if let Some(theta) = forward_applicable(z, action).into_iter().next() {
            return Some(PolicyEntry {
                state: z.clone(),
                action: action.name.clone(),
                theta,
            });
        }
    }
    None
}

/// Expand the current best partial policy: follow policy actions from the
/// initial states, accumulating the visited set E and the fringe F of
/// states reached but never expanded before. G absorbs the fringe. States
/// without any applicable action are dropped with a warning and counted.
pub fn policy_expansion(
    policy: &mut Policy,
    s0: &[CNState],
    g: &mut BTreeSet<CNState>,
    dom: &DomainSpec,
) -> (BTreeSet<CNState>, BTreeSet<CNState>, usize) {
    let mut e: BTreeSet<CNState> = BTreeSet::new();
    let mut f: BTreeSet<CNState> = BTreeSet::new();
    let mut from: BTreeSet<CNState> = s0.iter().cloned().collect();
    let mut dead_ends = 0;

    while !from.is_empty() {
        let mut to: BTreeSet<CNState> = BTreeSet::new();
        for z in &from {
            if dom.reward.is_absorbing(z) {
                continue;
            }
            let entry = match policy.get(z) {
                Some(entry) => entry.clone(),
                None => match initial_policy_entry(z, dom) {
                    Some(entry) => {
                        policy.set(entry.clone());
                        entry
                    }
                    None => {
                        log::warn!("dead end dropped from expansion: {z}");
                        dead_ends += 1;
                        continue;
                    }
                },
            };
            let Some(action) = dom.action(&entry.action) else {
                log::warn!("policy names unknown action {}", entry.action);
                dead_ends += 1;
                continue;
            };
            for choice in &action.choices {
                match successor(z, choice, &entry.theta) {
                    Ok(next) => {
                        to.insert(next);
                    }
                    Err(err) => {
                        log::warn!("stale policy entry at {z}: {err}");
                    }
                }
            }
        }
        for z in &to {
            if !g.contains(z) {
                f.insert(z.clone());
            }
        }
        e.extend(from.iter().cloned());
        from = to
            .into_iter()
            .filter(|z| g.contains(z) && !e.contains(z))
            .collect();
    }
    e.extend(f.iter().cloned());
    g.extend(f.iter().cloned());
    (e, f, dead_ends)
}

/// Build an admissible heuristic. The base case is the constant maximal
/// reward; each sweep regresses the known states through every nature's
/// choice and backs their values up against the previous sweep's function,
/// whose defaults keep unexplored successors optimistic.
pub fn make_heuristic(dom: &DomainSpec, sweeps: usize, gamma: f64) -> ValueFunction {
    let r_max = dom.reward.max_reward();
    let mut v = ValueFunction::new(r_max);
    if sweeps == 0 {
        return v;
    }
    let mut states: Vec<CNState> = Vec::new();
    let mut seen: BTreeSet<CNState> = BTreeSet::new();
    for rule in &dom.reward.rules {
        let z = rule.condition.canonical();
        if seen.insert(z.clone()) {
            states.push(z.clone());
            v.set(z, r_max);
        }
    }
    for _ in 0..sweeps {
        let mut wave = Vec::new();
        for z in &states {
            if seen.len() + wave.len() >= HEURISTIC_STATE_CAP {
                log::warn!("heuristic regression capped at {HEURISTIC_STATE_CAP} states");
                break;
            }
            for action in &dom.actions {
                for choice in &action.choices {
                    for theta in backward_applicable(z, action, choice) {
                        if let Ok(pred) = predecessor(z, choice, &theta) {
                            if !seen.contains(&pred) {
                                wave.push(pred);
                            }
                        }
                    }
                }
            }
        }
        for z in wave {
            if seen.insert(z.clone()) {
                v.set(z.clone(), r_max);
                states.push(z);
            }
        }
        // One optimistic backup of every generated state against the
        // snapshot. Abstract dead ends keep their previous value: their
        // extensions may still contain states with applicable actions.
        let table = TransitionTable::prepare(dom, states.iter());
        let swept = table.sweep(dom, gamma, &v);
        let mut next = v.clone();
        for z in &states {
            let fresh = swept.values.exact(z).expect("swept state has a value");
            let had_actions = swept.policy.get(z).is_some() || dom.reward.is_absorbing(z);
            if had_actions {
                next.set(z.clone(), fresh);
            }
        }
        v = next;
    }
    v
}

/// The full heuristic-search solver: alternate policy expansion and value
/// iteration on the visited envelope until the fringe is empty and the
/// residual is within epsilon. On hitting the outer iteration cap the best
/// partial solution is returned with `converged = false`.
pub fn folao(dom: &DomainSpec, s0: &[GroundState], cfg: &SolveConfig) -> Result<SolveResult> {
    solve(dom, s0, cfg, false)
}

/// Exhaustive variant: expand every abstract state reachable under any
/// applicable action, then run value iteration over all of them.
pub fn solve_exhaustive(
    dom: &DomainSpec,
    s0: &[GroundState],
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    solve(dom, s0, cfg, true)
}

fn solve(
    dom: &DomainSpec,
    s0: &[GroundState],
    cfg: &SolveConfig,
    exhaustive: bool,
) -> Result<SolveResult> {
    if s0.is_empty() {
        return Err(Error::validation("no initial states".to_string()));
    }
    let start = Instant::now();
    let gamma = cfg.gamma.unwrap_or(dom.gamma);
    let heuristic = make_heuristic(dom, cfg.heuristic_sweeps, gamma);
    let heuristic_entries = heuristic.len();
    let lifted = abstract_initial_states(s0);

    let mut v = heuristic;
    let mut policy = Policy::new();
    let mut g: BTreeSet<CNState> = BTreeSet::new();
    let mut stats = SolveStats {
        solver: if exhaustive { "fovia" } else { "folao" },
        converged: false,
        abstract_states: 0,
        outer_iterations: 0,
        fovia_sweeps: 0,
        q_evaluations: 0,
        heuristic_entries,
        dead_ends: 0,
        residual: f64::INFINITY,
        epsilon: cfg.epsilon,
        gamma,
        expansion_sizes: Vec::new(),
        envelope_sizes: Vec::new(),
        value_entries: 0,
        policy_entries: 0,
        wall_ms: 0,
    };

    if exhaustive {
        g = reachable_closure(dom, &lifted)?;
        let run = fovia_loop(&g, &v, cfg.epsilon, cfg.max_inner_iters, dom, gamma)?;
        v = run.result.values;
        policy.merge(run.result.policy);
        stats.outer_iterations = 1;
        stats.fovia_sweeps = run.sweeps;
        stats.q_evaluations = run.q_evaluations;
        stats.residual = run.result.residual;
        stats.converged = run.result.residual <= cfg.epsilon;
        stats.expansion_sizes.push(g.len());
        stats.envelope_sizes.push(g.len());
    } else {
        for outer in 1..=cfg.max_outer_iters {
            let (e, f, dead) = policy_expansion(&mut policy, &lifted, &mut g, dom);
            stats.dead_ends += dead;
            stats.expansion_sizes.push(f.len());
            stats.envelope_sizes.push(e.len());
            let run = fovia_loop(&e, &v, cfg.epsilon, cfg.max_inner_iters, dom, gamma)?;
            v = run.result.values;
            policy.merge(run.result.policy);
            stats.fovia_sweeps += run.sweeps;
            stats.q_evaluations += run.q_evaluations;
            stats.residual = run.result.residual;
            stats.outer_iterations = outer;
            if f.is_empty() && run.result.residual <= cfg.epsilon {
                stats.converged = true;
                break;
            }
        }
    }

    stats.abstract_states = g.len();
    stats.value_entries = v.len();
    stats.policy_entries = policy.len();
    stats.wall_ms = start.elapsed().as_millis();
    Ok(SolveResult {
        values: v,
        policy,
        envelope: g,
        stats,
    })
}

/// Closure of the lifted initial states under every applicable action and
/// choice; absorbing states are not expanded.
pub fn reachable_closure(dom: &DomainSpec, s0: &[CNState]) -> Result<BTreeSet<CNState>> {
    let mut g: BTreeSet<CNState> = BTreeSet::new();
    let mut queue: Vec<CNState> = s0.to_vec();
    while let Some(z) = queue.pop() {
        if g.contains(&z) {
            continue;
        }
        if g.len() >= ABSTRACT_STATE_BOUND {
            return Err(Error::StateBound(ABSTRACT_STATE_BOUND));
        }
        g.insert(z.clone());
        if dom.reward.is_absorbing(&z) {
            continue;
        }
        for action in &dom.actions {
            for theta in forward_applicable(&z, action) {
                for choice in &action.choices {
                    if let Ok(next) = successor(&z, choice, &theta) {
                        if !g.contains(&next) {
                            queue.push(next);
                        }
                    }
                }
            }
        }
    }
    Ok(g)
}

/// The convergence certificate: expanding the returned policy adds no fringe
/// and one extra backup sweep stays within epsilon.
pub fn termination_certificate(
    dom: &DomainSpec,
    s0: &[GroundState],
    result: &SolveResult,
    epsilon: f64,
    gamma: f64,
) -> bool {
    let mut g = result.envelope.clone();
    let mut policy = result.policy.clone();
    let lifted = abstract_initial_states(s0);
    let (e, f, _) = policy_expansion(&mut policy, &lifted, &mut g, dom);
    if !f.is_empty() {
        return false;
    }
    backup(&e, &result.values, dom, gamma).residual <= epsilon
}

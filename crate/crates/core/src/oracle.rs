//! Brute-force ground MDP oracle: explicit reachable-state enumeration and
//! classical value iteration, used to cross-check every abstract-level
//! result on small instances.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::action::{ground_apply, ground_applicable_substs};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::state::CNState;
use crate::term::{GroundState, Substitution};
use crate::value::{Policy, PolicyEntry, ValueFunction};

pub const DEFAULT_STATE_BOUND: usize = 200_000;
const MAX_VI_SWEEPS: usize = 1_000_000;

/// One ground action instance available at a state.
#[derive(Debug, Clone)]
pub struct GroundAction {
    pub action_idx: usize,
    pub theta: Substitution,
    pub cost: f64,
    /// (probability, successor state index) per nature's choice.
    pub outcomes: Vec<(f64, usize)>,
}

/// An explicit MDP over ground states.
#[derive(Debug, Clone)]
pub struct GroundMDP {
    pub states: Vec<GroundState>,
    pub index: BTreeMap<GroundState, usize>,
    pub transitions: Vec<Vec<GroundAction>>,
    pub rewards: Vec<f64>,
    pub absorbing: Vec<bool>,
    pub gamma: f64,
}

impl GroundMDP {
    pub fn state_index(&self, d: &GroundState) -> Option<usize> {
        self.index.get(d).copied()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn is_terminal(&self, s: usize) -> bool {
        self.absorbing[s] || self.transitions[s].is_empty()
    }
}

/// Breadth-first closure of the initial states under every ground instance
/// of every nature's choice. Deterministic ordering: states are indexed in
/// discovery order, actions in declaration order, substitutions in their
/// canonical order.
pub fn enumerate_reachable(
    dom: &DomainSpec,
    starts: &[GroundState],
    universe: &BTreeSet<String>,
    state_bound: usize,
) -> Result<GroundMDP> {
    let mut states: Vec<GroundState> = Vec::new();
    let mut index: BTreeMap<GroundState, usize> = BTreeMap::new();
    let mut queue: VecDeque<usize> = VecDeque::new();

    let intern = |d: GroundState,
                      states: &mut Vec<GroundState>,
                      index: &mut BTreeMap<GroundState, usize>,
                      queue: &mut VecDeque<usize>|
     -> Result<usize> {
        if let Some(&i) = index.get(&d) {
            return Ok(i);
        }
        if states.len() >= state_bound {
            return Err(Error::StateBound(state_bound));
        }
        let i = states.len();
        index.insert(d.clone(), i);
        states.push(d);
        queue.push_back(i);
        Ok(i)
    };

    for d in starts {
        intern(d.clone(), &mut states, &mut index, &mut queue)?;
    }

    let mut transitions: Vec<Vec<GroundAction>> = Vec::new();
    let mut rewards: Vec<f64> = Vec::new();
    let mut absorbing: Vec<bool> = Vec::new();

    while let Some(s) = queue.pop_front() {
        debug_assert_eq!(transitions.len(), s);
        let d = states[s].clone();
        let rule = dom.reward.matching_rule_ground(&d);
        rewards.push(rule.map_or(dom.reward.default_value, |r| r.value));
        let is_absorbing = rule.is_some_and(|r| r.absorbing);
        absorbing.push(is_absorbing);
        let mut acts = Vec::new();
        if !is_absorbing {
            for (action_idx, action) in dom.actions.iter().enumerate() {
                for theta in ground_applicable_substs(&d, action, universe) {
                    let mut outcomes = Vec::with_capacity(action.choices.len());
                    for choice in &action.choices {
                        let next = ground_apply(&d, choice, &theta)?;
                        let i = intern(next, &mut states, &mut index, &mut queue)?;
                        outcomes.push((choice.prob, i));
                    }
                    acts.push(GroundAction {
                        action_idx,
                        theta,
                        cost: action.cost,
                        outcomes,
                    });
                }
            }
        }
        transitions.push(acts);
    }

    Ok(GroundMDP {
        states,
        index,
        transitions,
        rewards,
        absorbing,
        gamma: dom.gamma,
    })
}

/// Optimal values and a greedy policy for a ground MDP.
#[derive(Debug, Clone)]
pub struct GroundSolution {
    pub values: Vec<f64>,
    /// Index into `transitions[s]` of the chosen action; `None` at terminal
    /// states.
    pub policy: Vec<Option<usize>>,
    pub sweeps: usize,
}

/// Classical Bellman iteration to the given residual. With an undiscounted
/// model, every state must be able to reach a terminal state.
pub fn ground_value_iteration(m: &GroundMDP, epsilon: f64) -> Result<GroundSolution> {
    if epsilon <= 0.0 {
        return Err(Error::validation("epsilon must be positive".to_string()));
    }
    if m.gamma >= 1.0 {
        check_terminal_reachability(m)?;
    }
    let n = m.len();
    let mut values = vec![0.0; n];
    for s in 0..n {
        if m.is_terminal(s) {
            values[s] = m.rewards[s];
        }
    }
    let mut sweeps = 0;
    loop {
        let mut next = vec![0.0; n];
        let mut residual: f64 = 0.0;
        for s in 0..n {
            next[s] = if m.is_terminal(s) {
                m.rewards[s]
            } else {
                let best = m.transitions[s]
                    .iter()
                    .map(|a| {
                        let exp: f64 =
                            a.outcomes.iter().map(|&(p, t)| p * values[t]).sum();
                        a.cost + m.gamma * exp
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                m.rewards[s] + best
            };
            residual = residual.max((next[s] - values[s]).abs());
        }
        values = next;
        sweeps += 1;
        if residual <= epsilon {
            break;
        }
        if sweeps >= MAX_VI_SWEEPS {
            return Err(Error::Diverged(MAX_VI_SWEEPS));
        }
    }
    let mut policy = vec![None; n];
    for s in 0..n {
        if m.is_terminal(s) {
            continue;
        }
        let mut best = f64::NEG_INFINITY;
        for (i, a) in m.transitions[s].iter().enumerate() {
            let exp: f64 = a.outcomes.iter().map(|&(p, t)| p * values[t]).sum();
            let q = m.rewards[s] + a.cost + m.gamma * exp;
            if q > best {
                best = q;
                policy[s] = Some(i);
            }
        }
    }
    Ok(GroundSolution {
        values,
        policy,
        sweeps,
    })
}

fn check_terminal_reachability(m: &GroundMDP) -> Result<()> {
    // Backward closure from terminal states over the transition graph.
    let n = m.len();
    let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, acts) in m.transitions.iter().enumerate() {
        for a in acts {
            for &(_, t) in &a.outcomes {
                predecessors[t].push(s);
            }
        }
    }
    let mut reached = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| m.is_terminal(s)).collect();
    for &s in &queue {
        reached[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        for &p in &predecessors[s] {
            if !reached[p] {
                reached[p] = true;
                queue.push_back(p);
            }
        }
    }
    match reached.iter().position(|r| !r) {
        None => Ok(()),
        Some(s) => Err(Error::validation(format!(
            "gamma = 1 but state {} cannot reach an absorbing state",
            m.states[s]
        ))),
    }
}

/// Lift the ground optimal policy to abstract policy entries over lifted
/// states, in state-index order.
pub fn ground_policy_to_abstract(
    dom: &DomainSpec,
    m: &GroundMDP,
    solution: &GroundSolution,
) -> Policy {
    let mut policy = Policy::new();
    for (s, choice) in solution.policy.iter().enumerate() {
        let Some(i) = choice else { continue };
        let act = &m.transitions[s][*i];
        policy.set(PolicyEntry {
            state: CNState::lift(&m.states[s]).canonical(),
            action: dom.actions[act.action_idx].name.clone(),
            theta: act.theta.clone(),
        });
    }
    policy
}

/// Exact expected total reward of following `policy` from every state:
/// iterative policy evaluation. States the policy does not cover count as
/// dead ends and keep their reward.
pub fn policy_expected_value(
    dom: &DomainSpec,
    m: &GroundMDP,
    policy: &Policy,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let n = m.len();
    // Resolve each state's policy action once.
    let mut chosen: Vec<Option<&GroundAction>> = vec![None; n];
    for s in 0..n {
        if m.is_terminal(s) {
            continue;
        }
        if let Some(entry) = policy.lookup_ground(&m.states[s]) {
            chosen[s] = m.transitions[s].iter().find(|a| {
                dom.actions[a.action_idx].name == entry.action && a.theta == entry.theta
            });
        }
    }
    let mut values = vec![0.0; n];
    for s in 0..n {
        if m.is_terminal(s) || chosen[s].is_none() {
            values[s] = m.rewards[s];
        }
    }
    let mut sweeps = 0;
    loop {
        let mut next = vec![0.0; n];
        let mut residual: f64 = 0.0;
        for s in 0..n {
            next[s] = match chosen[s] {
                _ if m.is_terminal(s) => m.rewards[s],
                None => m.rewards[s],
                Some(a) => {
                    let exp: f64 = a.outcomes.iter().map(|&(p, t)| p * values[t]).sum();
                    m.rewards[s] + a.cost + m.gamma * exp
                }
            };
            residual = residual.max((next[s] - values[s]).abs());
        }
        values = next;
        sweeps += 1;
        if residual <= epsilon {
            return Ok(values);
        }
        if sweeps >= MAX_VI_SWEEPS {
            return Err(Error::Diverged(MAX_VI_SWEEPS));
        }
    }
}

/// Comparison of an abstract value function against ground optimal values.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub tolerance: f64,
    pub checked: usize,
    pub max_abs_deviation: f64,
    /// (state index, ground optimal, abstract lookup) beyond tolerance.
    pub offenders: Vec<(usize, f64, f64)>,
}

impl ValidationReport {
    pub fn within_tolerance(&self) -> bool {
        self.offenders.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "checked={}", self.checked)?;
        writeln!(f, "tolerance={}", self.tolerance)?;
        writeln!(f, "max_abs_deviation={:.6e}", self.max_abs_deviation)?;
        writeln!(f, "offenders={}", self.offenders.len())?;
        for (s, ground, abstract_v) in self.offenders.iter().take(20) {
            writeln!(
                f,
                "offender state={s} ground={ground} abstract={abstract_v}"
            )?;
        }
        Ok(())
    }
}

/// Compare the abstract value function's ground lookups against the optimal
/// values of the explicit MDP, at every state (or a provided subset).
pub fn cross_validate(
    v: &ValueFunction,
    m: &GroundMDP,
    optimal: &[f64],
    tolerance: f64,
) -> ValidationReport {
    cross_validate_subset(v, m, optimal, tolerance, 0..m.len())
}

pub fn cross_validate_subset(
    v: &ValueFunction,
    m: &GroundMDP,
    optimal: &[f64],
    tolerance: f64,
    states: impl IntoIterator<Item = usize>,
) -> ValidationReport {
    let mut max_abs: f64 = 0.0;
    let mut offenders = Vec::new();
    let mut checked = 0;
    for s in states {
        checked += 1;
        let lookup = v.lookup_ground(&m.states[s]);
        let dev = (lookup - optimal[s]).abs();
        max_abs = max_abs.max(dev);
        if dev > tolerance {
            offenders.push((s, optimal[s], lookup));
        }
    }
    ValidationReport {
        tolerance,
        checked,
        max_abs_deviation: max_abs,
        offenders,
    }
}

/// The smallest signed margin `lookup - optimal` over all states; a
/// non-negative result certifies the admissibility direction.
pub fn admissibility_margin(v: &ValueFunction, m: &GroundMDP, optimal: &[f64]) -> f64 {
    (0..m.len())
        .map(|s| v.lookup_ground(&m.states[s]) - optimal[s])
        .fold(f64::INFINITY, f64::min)
}

/// Ground states reachable from `starts` by following the policy's action
/// (over all nature's choices) inside the explicit MDP: the set the
/// heuristic search converges over.
pub fn policy_reachable_states(
    dom: &DomainSpec,
    m: &GroundMDP,
    policy: &Policy,
    starts: &[GroundState],
) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut queue: Vec<usize> = starts.iter().filter_map(|d| m.state_index(d)).collect();
    while let Some(s) = queue.pop() {
        if !seen.insert(s) {
            continue;
        }
        if m.absorbing[s] {
            continue;
        }
        let Some(entry) = policy.lookup_ground(&m.states[s]) else {
            continue;
        };
        let Some(act) = m.transitions[s]
            .iter()
            .find(|a| dom.actions[a.action_idx].name == entry.action && a.theta == entry.theta)
        else {
            continue;
        };
        for &(_, t) in &act.outcomes {
            queue.push(t);
        }
    }
    seen
}

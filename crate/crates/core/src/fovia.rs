//! First-order value iteration: Jacobi-style Q-backups over a set of
//! abstract states against a snapshot of the value function.
//!
//! Applicability is computed once per action and successors once per
//! nature's choice; sweeps then only combine probabilities, costs, and
//! value lookups. States matched by an absorbing reward rule keep their
//! reward and are never backed up further.

use std::collections::BTreeSet;

use crate::action::{forward_applicable, successor, StochasticAction};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::state::CNState;
use crate::term::Substitution;
use crate::value::{Policy, PolicyEntry, ValueFunction};

/// Result of one or more backup sweeps.
#[derive(Debug, Clone)]
pub struct BackupResult {
    pub values: ValueFunction,
    pub policy: Policy,
    /// Sup-norm change of the last sweep; `INFINITY` when no sweep ran.
    pub residual: f64,
}

/// The Q-value of acting at `z` with `action` under `theta`, evaluated
/// against `v`: reward plus cost plus the discounted expectation over
/// nature's choices. Absorbing states accrue nothing beyond their reward.
pub fn q_value(
    dom: &DomainSpec,
    gamma: f64,
    z: &CNState,
    action: &StochasticAction,
    theta: &Substitution,
    v: &ValueFunction,
) -> Result<f64> {
    if dom.reward.is_absorbing(z) {
        return Ok(dom.reward.reward(z));
    }
    let mut expectation = 0.0;
    for choice in &action.choices {
        let next = successor(z, choice, theta)?;
        expectation += choice.prob * v.lookup(&next);
    }
    Ok(dom.reward.reward(z) + action.cost + gamma * expectation)
}

#[derive(Debug, Clone)]
struct Outcome {
    prob: f64,
    next: CNState,
}

#[derive(Debug, Clone)]
struct CandidateAction {
    action_idx: usize,
    theta: Substitution,
    outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone)]
struct Row {
    state: CNState,
    reward: f64,
    absorbing: bool,
    acts: Vec<CandidateAction>,
}

/// Per-state applicability and successors, computed once for a fixed state
/// set and reused across sweeps.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    rows: Vec<Row>,
}

impl TransitionTable {
    pub fn prepare<'a>(dom: &DomainSpec, states: impl IntoIterator<Item = &'a CNState>) -> Self {
        let rows = states
            .into_iter()
            .map(|z| {
                let rule = dom.reward.matching_rule(z);
                let reward = rule.map_or(dom.reward.default_value, |r| r.value);
                let absorbing = rule.is_some_and(|r| r.absorbing);
                let mut acts = Vec::new();
                for (action_idx, action) in dom.actions.iter().enumerate() {
                    for theta in forward_applicable(z, action) {
                        let outcomes: Result<Vec<Outcome>> = action
                            .choices
                            .iter()
                            .map(|choice| {
                                successor(z, choice, &theta).map(|next| Outcome {
                                    prob: choice.prob,
                                    next,
                                })
                            })
                            .collect();
                        match outcomes {
                            Ok(outcomes) => acts.push(CandidateAction {
                                action_idx,
                                theta,
                                outcomes,
                            }),
                            Err(_) => debug_assert!(false, "applicable theta failed to progress"),
                        }
                    }
                }
                Row {
                    state: z.clone(),
                    reward,
                    absorbing,
                    acts,
                }
            })
            .collect();
        TransitionTable { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of Q evaluations a single sweep performs.
    pub fn q_evaluations_per_sweep(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| !r.absorbing)
            .map(|r| r.acts.len())
            .sum()
    }

    /// One Jacobi sweep against the snapshot `v`. Returns the updated value
    /// function, the per-state argmax policy, and the residual.
    pub fn sweep(&self, dom: &DomainSpec, gamma: f64, v: &ValueFunction) -> BackupResult {
        let mut updates: Vec<(CNState, f64)> = Vec::with_capacity(self.rows.len());
        let mut policy = Policy::new();
        let mut residual: f64 = 0.0;
        for row in &self.rows {
            let old = v.lookup(&row.state);
            let mut best_act: Option<&CandidateAction> = None;
            let new = if row.absorbing {
                best_act = row.acts.first();
                row.reward
            } else if row.acts.is_empty() {
                // Dead end: no applicable action, the state keeps its reward.
                row.reward
            } else {
                let mut best = f64::NEG_INFINITY;
                for act in &row.acts {
                    let expectation: f64 = act
                        .outcomes
                        .iter()
                        .map(|o| o.prob * v.lookup(&o.next))
                        .sum();
                    let q =
                        row.reward + dom.actions[act.action_idx].cost + gamma * expectation;
                    if q > best {
                        best = q;
                        best_act = Some(act);
                    }
                }
                best
            };
            if let Some(act) = best_act {
                policy.set(PolicyEntry {
                    state: row.state.clone(),
                    action: dom.actions[act.action_idx].name.clone(),
                    theta: act.theta.clone(),
                });
            }
            residual = residual.max((new - old).abs());
            updates.push((row.state.clone(), new));
        }
        let mut values = v.clone();
        for (z, val) in updates {
            values.set(z, val);
        }
        BackupResult {
            values,
            policy,
            residual,
        }
    }
}

/// A single backup sweep over `states`.
pub fn backup(
    states: &BTreeSet<CNState>,
    v: &ValueFunction,
    dom: &DomainSpec,
    gamma: f64,
) -> BackupResult {
    TransitionTable::prepare(dom, states).sweep(dom, gamma, v)
}

/// A finished run of value-iteration sweeps.
#[derive(Debug, Clone)]
pub struct FoviaRun {
    pub result: BackupResult,
    pub sweeps: usize,
    pub q_evaluations: usize,
}

/// Iterate backups until the residual drops to `epsilon` or `max_iters`
/// sweeps have run. With `max_iters == 0` the input is returned unchanged
/// with an infinite residual.
pub fn fovia_loop(
    states: &BTreeSet<CNState>,
    v: &ValueFunction,
    epsilon: f64,
    max_iters: usize,
    dom: &DomainSpec,
    gamma: f64,
) -> Result<FoviaRun> {
    if epsilon <= 0.0 {
        return Err(Error::validation("epsilon must be positive".to_string()));
    }
    if max_iters == 0 || states.is_empty() {
        return Ok(FoviaRun {
            result: BackupResult {
                values: v.clone(),
                policy: Policy::new(),
                residual: f64::INFINITY,
            },
            sweeps: 0,
            q_evaluations: 0,
        });
    }
    let table = TransitionTable::prepare(dom, states);
    let per_sweep = table.q_evaluations_per_sweep();
    let mut current = v.clone();
    let mut sweeps = 0;
    loop {
        let result = table.sweep(dom, gamma, &current);
        sweeps += 1;
        if result.residual <= epsilon || sweeps >= max_iters {
            return Ok(FoviaRun {
                result,
                sweeps,
                q_evaluations: per_sweep * sweeps,
            });
        }
        current = result.values;
    }
}

/// Extract the greedy policy from a value function: per entry state, the
/// argmax (action, theta) of the Q-value against `v`. Ties break by action
/// declaration order, then by the canonical substitution order. States with
/// no applicable action get no entry.
pub fn extract_policy(v: &ValueFunction, dom: &DomainSpec, gamma: f64) -> Policy {
    let states: Vec<CNState> = v.states().cloned().collect();
    let table = TransitionTable::prepare(dom, states.iter());
    table.sweep(dom, gamma, v).policy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{NatureChoice, RewardModel, RewardRule};
    use crate::domain::{DomainSpec, FluentDecl};
    use crate::term::{Fluent, FluentTerm, Term};

    fn fluent(symbol: &str, args: &[&str]) -> Fluent {
        Fluent::new(symbol, args.iter().map(|a| Term::from_name(a)).collect())
    }

    fn state(fluents: &[Fluent]) -> CNState {
        CNState::positive_only(FluentTerm::from_fluents(fluents.to_vec())).canonical()
    }

    /// A two-location chain: `step` moves from `at(s)` to `at(g)`; the goal
    /// rewards 500 and absorbs. A variant with a failure choice exercises
    /// the expectation.
    fn chain_domain(success_prob: f64, gamma: f64) -> DomainSpec {
        let pre = CNState::positive_only(FluentTerm::from_fluents(vec![fluent("at", &["s"])]));
        let eff = CNState::positive_only(FluentTerm::from_fluents(vec![fluent("at", &["g"])]));
        let mut choices = vec![NatureChoice {
            name: "stepS".into(),
            params: vec![],
            pre: pre.clone(),
            eff,
            prob: success_prob,
        }];
        if success_prob < 1.0 {
            choices.push(NatureChoice {
                name: "stepF".into(),
                params: vec![],
                pre: pre.clone(),
                eff: pre.clone(),
                prob: 1.0 - success_prob,
            });
        }
        DomainSpec {
            name: "chain".into(),
            fluents: vec![FluentDecl {
                symbol: "at".into(),
                arity: 1,
            }],
            actions: vec![StochasticAction {
                name: "step".into(),
                params: vec![],
                choices,
                cost: -3.0,
            }],
            reward: RewardModel {
                rules: vec![RewardRule {
                    condition: CNState::positive_only(FluentTerm::from_fluents(vec![fluent(
                        "at",
                        &["g"],
                    )])),
                    value: 500.0,
                    absorbing: true,
                }],
                default_value: 0.0,
            },
            gamma,
        }
    }

    #[test]
    fn q_value_at_absorbing_state_is_its_reward() {
        let dom = chain_domain(1.0, 1.0);
        let goal = state(&[fluent("at", &["g"])]);
        let v = ValueFunction::new(0.0);
        let q = q_value(
            &dom,
            1.0,
            &goal,
            &dom.actions[0],
            &Substitution::empty(),
            &v,
        )
        .unwrap();
        assert_eq!(q, 500.0);
    }

    #[test]
    fn q_value_deterministic_one_step() {
        // gamma = 1, V'(succ) = 500, reward 0, cost -3 -> 497.
        let dom = chain_domain(1.0, 1.0);
        let start = state(&[fluent("at", &["s"])]);
        let mut v = ValueFunction::new(0.0);
        v.set(state(&[fluent("at", &["g"])]), 500.0);
        let q = q_value(
            &dom,
            1.0,
            &start,
            &dom.actions[0],
            &Substitution::empty(),
            &v,
        )
        .unwrap();
        assert!((q - 497.0).abs() < 1e-12);
    }

    #[test]
    fn q_value_two_choice_expectation() {
        // Choices .75/.25 with successor values 500/0, reward 0, cost -3,
        // gamma 0.9: -3 + 0.9 * 0.75 * 500 = 334.5.
        let dom = chain_domain(0.75, 0.9);
        let start = state(&[fluent("at", &["s"])]);
        let mut v = ValueFunction::new(0.0);
        v.set(state(&[fluent("at", &["g"])]), 500.0);
        v.set(start.clone(), 0.0);
        let q = q_value(
            &dom,
            0.9,
            &start,
            &dom.actions[0],
            &Substitution::empty(),
            &v,
        )
        .unwrap();
        assert!((q - 334.5).abs() < 1e-12, "q = {q}");
    }

    #[test]
    fn q_value_rejects_inapplicable() {
        let dom = chain_domain(1.0, 1.0);
        let elsewhere = state(&[fluent("at", &["x"])]);
        let res = q_value(
            &dom,
            1.0,
            &elsewhere,
            &dom.actions[0],
            &Substitution::empty(),
            &ValueFunction::new(0.0),
        );
        assert!(res.is_err());
    }

    #[test]
    fn backup_of_absorbing_goal() {
        let dom = chain_domain(1.0, 1.0);
        let goal = state(&[fluent("at", &["g"])]);
        let mut e = BTreeSet::new();
        e.insert(goal.clone());
        let v = ValueFunction::new(0.0);
        let result = backup(&e, &v, &dom, 1.0);
        assert_eq!(result.values.exact(&goal), Some(500.0));
        assert!((result.residual - 500.0).abs() < 1e-12);
    }

    #[test]
    fn backup_one_step_to_goal() {
        let dom = chain_domain(1.0, 1.0);
        let start = state(&[fluent("at", &["s"])]);
        let goal = state(&[fluent("at", &["g"])]);
        let mut e = BTreeSet::new();
        e.insert(start.clone());
        e.insert(goal.clone());
        let mut v = ValueFunction::new(0.0);
        v.set(goal.clone(), 500.0);
        let result = backup(&e, &v, &dom, 1.0);
        assert_eq!(result.values.exact(&start), Some(497.0));
        assert_eq!(result.policy.get(&start).unwrap().action, "step");
    }

    #[test]
    fn dead_end_keeps_reward() {
        let dom = chain_domain(1.0, 1.0);
        let stuck = state(&[fluent("at", &["x"])]);
        let mut e = BTreeSet::new();
        e.insert(stuck.clone());
        let result = backup(&e, &ValueFunction::new(9.0), &dom, 1.0);
        assert_eq!(result.values.exact(&stuck), Some(0.0));
        assert!(result.policy.get(&stuck).is_none());
    }

    #[test]
    fn fovia_loop_zero_iters_is_identity() {
        let dom = chain_domain(1.0, 1.0);
        let mut e = BTreeSet::new();
        e.insert(state(&[fluent("at", &["s"])]));
        let v = ValueFunction::new(1.0);
        let run = fovia_loop(&e, &v, 1e-4, 0, &dom, 1.0).unwrap();
        assert_eq!(run.sweeps, 0);
        assert!(run.result.residual.is_infinite());
        assert_eq!(run.result.values.default_value, 1.0);
        assert_eq!(run.result.values.len(), 0);
    }

    #[test]
    fn fovia_loop_converges_with_failure_choice() {
        // V*(start) solves V = -3 + p*500 + (1-p)*V at gamma 1, p = 0.75:
        // V = (−3 + 375) / 0.75 = 496.
        let dom = chain_domain(0.75, 1.0);
        let start = state(&[fluent("at", &["s"])]);
        let goal = state(&[fluent("at", &["g"])]);
        let mut e = BTreeSet::new();
        e.insert(start.clone());
        e.insert(goal.clone());
        let v = ValueFunction::new(500.0);
        let run = fovia_loop(&e, &v, 1e-6, 1000, &dom, 1.0).unwrap();
        assert!(run.sweeps > 1);
        assert!(run.q_evaluations > 0);
        let got = run.result.values.exact(&start).unwrap();
        assert!((got - 496.0).abs() < 1e-4, "got {got}");
    }

    #[test]
    fn goal_only_set_converges_in_one_sweep() {
        let dom = chain_domain(1.0, 1.0);
        let goal = state(&[fluent("at", &["g"])]);
        let mut e = BTreeSet::new();
        e.insert(goal.clone());
        let mut v = ValueFunction::new(0.0);
        v.set(goal.clone(), 500.0);
        let run = fovia_loop(&e, &v, 1e-4, 100, &dom, 1.0).unwrap();
        assert_eq!(run.sweeps, 1);
        assert_eq!(run.result.residual, 0.0);
    }

    #[test]
    fn sweep_is_independent_of_state_order() {
        let dom = chain_domain(0.75, 1.0);
        let start = state(&[fluent("at", &["s"])]);
        let goal = state(&[fluent("at", &["g"])]);
        let mut v = ValueFunction::new(500.0);
        v.set(goal.clone(), 500.0);

        let forward = TransitionTable::prepare(&dom, [&start, &goal]);
        let reverse = TransitionTable::prepare(&dom, [&goal, &start]);
        let a = forward.sweep(&dom, 1.0, &v);
        let b = reverse.sweep(&dom, 1.0, &v);
        assert_eq!(a.values.exact(&start), b.values.exact(&start));
        assert_eq!(a.values.exact(&goal), b.values.exact(&goal));
        assert_eq!(a.residual, b.residual);
    }

    #[test]
    fn argmax_invariant_under_constant_shift_at_gamma_one() {
        let dom = chain_domain(0.75, 1.0);
        let start = state(&[fluent("at", &["s"])]);
        let goal = state(&[fluent("at", &["g"])]);
        let mut e = BTreeSet::new();
        e.insert(start.clone());

        let mut v = ValueFunction::new(10.0);
        v.set(goal.clone(), 500.0);
        let base = backup(&e, &v, &dom, 1.0);

        let c = 123.0;
        let mut shifted = ValueFunction::new(10.0 + c);
        shifted.set(goal.clone(), 500.0 + c);
        let moved = backup(&e, &shifted, &dom, 1.0);

        let pa = base.policy.get(&start).unwrap();
        let pb = moved.policy.get(&start).unwrap();
        assert_eq!(pa.action, pb.action);
        assert_eq!(pa.theta, pb.theta);
        // At gamma = 1 every Q moves by exactly c.
        let qa = base.values.exact(&start).unwrap();
        let qb = moved.values.exact(&start).unwrap();
        assert!((qb - qa - c).abs() < 1e-9);
    }

    #[test]
    fn contraction_at_discounted_gamma() {
        let dom = chain_domain(0.75, 0.9);
        let start = state(&[fluent("at", &["s"])]);
        let goal = state(&[fluent("at", &["g"])]);
        let mut e = BTreeSet::new();
        e.insert(start.clone());
        e.insert(goal.clone());
        let table = TransitionTable::prepare(&dom, e.iter());
        let mut v = ValueFunction::new(500.0);
        let mut last_residual = f64::INFINITY;
        for sweep_no in 0..30 {
            let result = table.sweep(&dom, 0.9, &v);
            if sweep_no > 0 {
                assert!(
                    result.residual <= last_residual + 1e-12,
                    "residual grew: {} -> {}",
                    last_residual,
                    result.residual
                );
            }
            last_residual = result.residual;
            v = result.values;
        }
    }

    #[test]
    fn extract_policy_is_deterministic_on_goal_states() {
        let dom = chain_domain(1.0, 1.0);
        // The goal state also has `at(s)` so the action applies; Q at an
        // absorbing state is its reward for every action, and the tie breaks
        // to the first declared action.
        let both = state(&[fluent("at", &["g"])]);
        let mut v = ValueFunction::new(0.0);
        v.set(both.clone(), 500.0);
        v.set(state(&[fluent("at", &["s"])]), 497.0);
        let p1 = extract_policy(&v, &dom, 1.0);
        let p2 = extract_policy(&v, &dom, 1.0);
        assert_eq!(
            p1.get(&state(&[fluent("at", &["s"])])).map(|e| &e.action),
            p2.get(&state(&[fluent("at", &["s"])])).map(|e| &e.action)
        );
    }
}

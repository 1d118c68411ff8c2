//! Stochastic actions decomposed into nature's choices, forward and backward
//! applicability, the abstract successor/predecessor operators, reward
//! models, and ground action application.

use std::collections::BTreeSet;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matching::{match_exists, match_into, match_into_with};
use crate::state::{
    ground_membership, rename_apart_map, subsumes, variant_members_eq, CNState,
};
use crate::term::{FluentTerm, GroundState, Substitution, Term};

/// A deterministic primitive of a stochastic action, selected by the
/// environment with a fixed probability.
#[derive(Debug, Clone, PartialEq)]
pub struct NatureChoice {
    pub name: String,
    pub params: Vec<String>,
    pub pre: CNState,
    pub eff: CNState,
    pub prob: f64,
}

/// A named stochastic action. All nature's choices share one precondition
/// (validated at load), so applicability is a property of the action and
/// successors are computed per choice.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticAction {
    pub name: String,
    pub params: Vec<String>,
    pub choices: Vec<NatureChoice>,
    pub cost: f64,
}

impl StochasticAction {
    /// The precondition shared by every choice.
    pub fn pre(&self) -> &CNState {
        &self.choices[0].pre
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.params.iter().cloned().collect();
        for ch in &self.choices {
            out.extend(ch.pre.vars());
            out.extend(ch.eff.vars());
        }
        out
    }
}

/// One reward rule: a condition state, the value it assigns, and whether
/// states matching it are absorbing.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardRule {
    pub condition: CNState,
    pub value: f64,
    pub absorbing: bool,
}

/// Reward model: an ordered decision list of rules plus a default. The first
/// rule whose condition subsumes the queried state applies.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    pub rules: Vec<RewardRule>,
    pub default_value: f64,
}

impl RewardModel {
    pub fn constant(value: f64) -> RewardModel {
        RewardModel {
            rules: Vec::new(),
            default_value: value,
        }
    }

    pub fn matching_rule(&self, z: &CNState) -> Option<&RewardRule> {
        self.rules.iter().find(|r| subsumes(&r.condition, z))
    }

    pub fn matching_rule_ground(&self, d: &GroundState) -> Option<&RewardRule> {
        self.rules.iter().find(|r| ground_membership(d, &r.condition))
    }

    pub fn reward(&self, z: &CNState) -> f64 {
        self.matching_rule(z).map_or(self.default_value, |r| r.value)
    }

    pub fn reward_ground(&self, d: &GroundState) -> f64 {
        self.matching_rule_ground(d)
            .map_or(self.default_value, |r| r.value)
    }

    pub fn is_absorbing(&self, z: &CNState) -> bool {
        self.matching_rule(z).is_some_and(|r| r.absorbing)
    }

    pub fn is_absorbing_ground(&self, d: &GroundState) -> bool {
        self.matching_rule_ground(d).is_some_and(|r| r.absorbing)
    }

    /// The largest value the model can assign.
    pub fn max_reward(&self) -> f64 {
        self.rules
            .iter()
            .map(|r| r.value)
            .fold(self.default_value, f64::max)
    }

    pub fn has_absorbing_rule(&self) -> bool {
        self.rules.iter().any(|r| r.absorbing)
    }
}

/// Forward applicability: every substitution over the precondition's
/// variables such that the positive precondition embeds into the state's
/// positive part and each negated precondition member is entailed by some
/// negation of the state.
pub fn forward_applicable(z: &CNState, action: &StochasticAction) -> BTreeSet<Substitution> {
    applicable_via(z, action.pre())
}

/// Backward applicability: the mirror of forward applicability with the
/// choice's effect in place of the precondition.
pub fn backward_applicable(
    z: &CNState,
    _action: &StochasticAction,
    choice: &NatureChoice,
) -> BTreeSet<Substitution> {
    applicable_via(z, &choice.eff)
}

fn applicable_via(z: &CNState, condition: &CNState) -> BTreeSet<Substitution> {
    // Standardize apart: the condition's variables must not clash with the
    // state's. Matching runs over renamed names; bound variables are
    // translated back so callers see the condition's original names.
    let fresh_by_orig = rename_apart_map(&condition.vars(), &z.vars());
    let renamed = if fresh_by_orig.is_empty() {
        condition.clone()
    } else {
        condition.apply(&Substitution::from_pairs(
            fresh_by_orig
                .iter()
                .map(|(from, to)| (from.clone(), Term::var(to.clone()))),
        ))
    };
    let orig_by_fresh: BTreeMap<&String, &String> =
        fresh_by_orig.iter().map(|(o, f)| (f, o)).collect();
    let cond_vars = renamed.vars();

    let mut out = BTreeSet::new();
    for theta0 in match_into(&renamed.positive, &z.positive) {
        // Each negated condition member must be entailed by some negation of
        // the state. Condition variables occurring only in negation members
        // may need bindings of their own; those are searched by embedding
        // the member into the state's negation contexts. A member already
        // entailed without further bindings adds none.
        let mut candidates: BTreeSet<Substitution> = BTreeSet::new();
        candidates.insert(theta0);
        for np in &renamed.negations {
            let mut next = BTreeSet::new();
            for theta in &candidates {
                let np_t = theta.apply_fluent_term(np);
                if negation_entailed(z, &np_t) {
                    next.insert(theta.clone());
                    continue;
                }
                let unbound: BTreeSet<String> = np_t
                    .vars()
                    .intersection(&cond_vars)
                    .cloned()
                    .collect();
                if unbound.is_empty() {
                    continue;
                }
                for n in &z.negations {
                    let ctx = z.positive.compose(n);
                    for ext in match_into_with(&np_t, &ctx, &unbound) {
                        let extended = theta.compose(&ext);
                        if negation_entailed(z, &extended.apply_fluent_term(np)) {
                            next.insert(extended);
                        }
                    }
                }
            }
            candidates = next;
            if candidates.is_empty() {
                break;
            }
        }
        for theta in candidates {
            out.insert(Substitution::from_pairs(theta.iter().map(|(v, t)| {
                let name = orig_by_fresh.get(v).map_or(v.as_str(), |o| o.as_str());
                (name.to_string(), t.clone())
            })));
        }
    }
    out
}

/// The negated-member condition: some negation of the state, in the positive
/// part's context, embeds into the member's context.
fn negation_entailed(z: &CNState, np_t: &FluentTerm) -> bool {
    let rhs = z.positive.compose(np_t);
    z.negations
        .iter()
        .any(|n| match_exists(&z.positive.compose(n), &rhs))
}

/// The successor of `z` through one nature's choice under `theta`:
/// positive part rewritten by multiset difference and union, negations
/// carried over minus the consumed precondition negations plus the effect
/// negations. The result is canonical.
pub fn successor(z: &CNState, choice: &NatureChoice, theta: &Substitution) -> Result<CNState> {
    transition(z, choice, theta, false)
}

/// The predecessor of `z` through one nature's choice under `theta`: the
/// mirror of [`successor`] with precondition and effect swapped.
pub fn predecessor(z: &CNState, choice: &NatureChoice, theta: &Substitution) -> Result<CNState> {
    transition(z, choice, theta, true)
}

fn transition(
    z: &CNState,
    choice: &NatureChoice,
    theta: &Substitution,
    backward: bool,
) -> Result<CNState> {
    let (from, to) = if backward {
        (&choice.eff, &choice.pre)
    } else {
        (&choice.pre, &choice.eff)
    };
    // Variables of the choice left unbound by theta become fresh variables of
    // the result; rename any that would clash with the state's vocabulary or
    // with variables introduced by theta's images.
    let mut cond_vars = from.vars();
    cond_vars.extend(to.vars());
    let unbound: BTreeSet<String> = cond_vars
        .into_iter()
        .filter(|v| theta.get(v).is_none())
        .collect();
    let mut avoid = z.vars();
    for (_, image) in theta.iter() {
        if let Term::Var(v) = image {
            avoid.insert(v.clone());
        }
    }
    let mut instantiate = theta.clone();
    for (orig, fresh) in rename_apart_map(&unbound, &avoid) {
        instantiate.bind(orig, Term::var(fresh));
    }
    let from = from.apply(&instantiate);
    let to = to.apply(&instantiate);
    let Some(remainder) = z.positive.minus(&from.positive) else {
        return Err(Error::not_applicable(format!(
            "{} of choice {} not included in {} under {theta}",
            if backward { "effect" } else { "precondition" },
            choice.name,
            z.positive,
        )));
    };
    let positive = remainder.compose(&to.positive);

    let mut fixed: BTreeSet<String> = z.positive_vars();
    fixed.extend(from.positive.vars());
    fixed.extend(to.positive.vars());
    let mut negations: Vec<FluentTerm> = z
        .negations
        .iter()
        .filter(|n| {
            !from
                .negations
                .iter()
                .any(|rem| variant_members_eq(n, rem, &fixed))
        })
        .cloned()
        .collect();
    negations.extend(to.negations.iter().cloned());

    Ok(CNState::new(positive, negations).canonical())
}

/// Ground application of one nature's choice. The substitution must ground
/// both parts; the positive precondition must be a sub-multiset of `d` and no
/// negated precondition may have an instance in `d`.
pub fn ground_apply(
    d: &GroundState,
    choice: &NatureChoice,
    theta: &Substitution,
) -> Result<GroundState> {
    let pre = choice.pre.apply(theta);
    let eff = choice.eff.apply(theta);
    // Negation members may keep existential locals; only the rewritten
    // multisets themselves must be ground.
    if !pre.positive.is_ground() || !eff.positive.is_ground() {
        return Err(Error::not_applicable(format!(
            "substitution {theta} does not ground choice {}",
            choice.name
        )));
    }
    let target = d.to_term();
    let Some(remainder) = target.minus(&pre.positive) else {
        return Err(Error::not_applicable(format!(
            "positive precondition of {} not contained in {d}",
            choice.name
        )));
    };
    for np in &pre.negations {
        if match_exists(np, &target) {
            return Err(Error::not_applicable(format!(
                "negated precondition {np} of {} holds in {d}",
                choice.name
            )));
        }
    }
    Ok(GroundState::from(remainder.compose(&eff.positive)))
}

/// Ground applicability of an action at `d`: true when the shared positive
/// precondition embeds and no negated precondition member has an instance.
pub fn ground_applicable(d: &GroundState, choice: &NatureChoice, theta: &Substitution) -> bool {
    let pre = choice.pre.apply(theta);
    if !pre.positive.is_ground() {
        return false;
    }
    let target = d.to_term();
    pre.positive.is_submultiset_of(&target)
        && pre.negations.iter().all(|np| !match_exists(np, &target))
}

/// All ground substitutions under which `action` applies at `d`. Parameters
/// not constrained by the precondition are instantiated over `universe`.
pub fn ground_applicable_substs(
    d: &GroundState,
    action: &StochasticAction,
    universe: &BTreeSet<String>,
) -> Vec<Substitution> {
    let pre = action.pre();
    let target = d.to_term();
    let mut out = Vec::new();
    for theta in match_into(&pre.positive, &target) {
        let mut free: Vec<String> = action
            .params
            .iter()
            .filter(|p| theta.get(p).is_none())
            .cloned()
            .collect();
        free.sort();
        let mut assignments = vec![theta];
        for var in free {
            let mut next = Vec::new();
            for base in &assignments {
                for obj in universe {
                    let mut ext = base.clone();
                    ext.bind(var.clone(), Term::constant(obj.clone()));
                    next.push(ext);
                }
            }
            assignments = next;
        }
        for theta in assignments {
            let ok = pre
                .negations
                .iter()
                .all(|np| !match_exists(&theta.apply_fluent_term(np), &target));
            if ok {
                out.push(theta);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Fluent;

    fn fluent(symbol: &str, args: &[&str]) -> Fluent {
        Fluent::new(symbol, args.iter().map(|a| Term::from_name(a)).collect())
    }

    fn ft(fluents: &[Fluent]) -> FluentTerm {
        FluentTerm::from_fluents(fluents.to_vec())
    }

    fn subst(pairs: &[(&str, &str)]) -> Substitution {
        Substitution::from_pairs(
            pairs
                .iter()
                .map(|(v, t)| (v.to_string(), Term::from_name(t))),
        )
    }

    /// The worked pickup action: pickupS consumes on(X, Y) and the empty
    /// gripper, produces holding(X); pickupF is a no-op failure.
    pub(crate) fn pickup_action() -> StochasticAction {
        let pre = CNState::new(
            ft(&[fluent("on", &["X", "Y"]), fluent("e", &[])]),
            vec![ft(&[fluent("on", &["W", "X"])])],
        );
        let eff = CNState::new(
            ft(&[fluent("holding", &["X"])]),
            vec![ft(&[fluent("on", &["X", "Y"])])],
        );
        StochasticAction {
            name: "pickup".into(),
            params: vec!["X".into(), "Y".into()],
            choices: vec![
                NatureChoice {
                    name: "pickupS".into(),
                    params: vec!["X".into(), "Y".into()],
                    pre: pre.clone(),
                    eff,
                    prob: 0.75,
                },
                NatureChoice {
                    name: "pickupF".into(),
                    params: vec!["X".into(), "Y".into()],
                    pre: pre.clone(),
                    eff: pre,
                    prob: 0.25,
                },
            ],
            cost: -3.0,
        }
    }

    fn worked_state() -> CNState {
        CNState::new(
            ft(&[
                fluent("on", &["b", "table"]),
                fluent("on", &["X1", "b"]),
                fluent("e", &[]),
            ]),
            vec![ft(&[fluent("on", &["X2", "X1"])])],
        )
    }

    #[test]
    fn forward_applicability_of_worked_example() {
        let action = pickup_action();
        let z = worked_state();
        let thetas = forward_applicable(&z, &action);
        assert!(thetas.contains(&subst(&[("X", "X1"), ("Y", "b")])));
        // Picking b up from the table is blocked: the state only knows that
        // nothing is on X1, while something (X1) is on b.
        assert_eq!(thetas.len(), 1);
    }

    #[test]
    fn vacuous_precondition_applies_everywhere() {
        let noop = StochasticAction {
            name: "wait".into(),
            params: vec![],
            choices: vec![NatureChoice {
                name: "waitS".into(),
                params: vec![],
                pre: CNState::universal(),
                eff: CNState::universal(),
                prob: 1.0,
            }],
            cost: 0.0,
        };
        let z = CNState::positive_only(ft(&[fluent("holding", &["c"])]));
        let thetas = forward_applicable(&z, &noop);
        assert_eq!(thetas.len(), 1);
        assert!(thetas.contains(&Substitution::empty()));
    }

    #[test]
    fn missing_positive_precondition_blocks() {
        let action = pickup_action();
        let z = CNState::positive_only(ft(&[fluent("holding", &["c"])]));
        assert!(forward_applicable(&z, &action).is_empty());
    }

    #[test]
    fn successor_of_worked_example() {
        let action = pickup_action();
        let z = worked_state();
        let theta = subst(&[("X", "X1"), ("Y", "b")]);
        let z1 = successor(&z, &action.choices[0], &theta).unwrap();
        let expected = CNState::new(
            ft(&[fluent("on", &["b", "table"]), fluent("holding", &["X1"])]),
            vec![ft(&[fluent("on", &["X1", "b"])])],
        )
        .canonical();
        assert_eq!(z1, expected);
    }

    #[test]
    fn noop_choice_returns_variant() {
        let action = pickup_action();
        let z = worked_state().canonical();
        let theta = subst(&[("X", "X1"), ("Y", "b")]);
        let z1 = successor(&z, &action.choices[1], &theta).unwrap();
        assert_eq!(z1, z.canonical());
    }

    #[test]
    fn successor_rejects_bad_theta() {
        let action = pickup_action();
        let z = worked_state();
        let theta = subst(&[("X", "zz"), ("Y", "b")]);
        assert!(successor(&z, &action.choices[0], &theta).is_err());
    }

    #[test]
    fn backward_applicability_mirrors_effects() {
        let action = pickup_action();
        let z = worked_state();
        let theta = subst(&[("X", "X1"), ("Y", "b")]);
        let z1 = successor(&z, &action.choices[0], &theta).unwrap();
        // Duality: the successor is backward applicable through the same
        // choice, restricted to the effect's variables.
        let back = backward_applicable(&z1, &action, &action.choices[0]);
        assert!(
            back.iter()
                .any(|t| t.get("X").is_some() && t.get("Y").map(Term::name) == Some("b")),
            "no backward match through pickupS: {back:?}"
        );
    }

    #[test]
    fn backward_inapplicable_without_positive_effect() {
        let action = pickup_action();
        let z = CNState::positive_only(ft(&[fluent("on", &["a", "b"])]));
        assert!(backward_applicable(&z, &action, &action.choices[0]).is_empty());
    }

    #[test]
    fn predecessor_of_successor_covers_original() {
        let action = pickup_action();
        let z = worked_state().canonical();
        let theta = subst(&[("X", "X1"), ("Y", "b")]);
        let z1 = successor(&z, &action.choices[0], &theta).unwrap();
        let back = backward_applicable(&z1, &action, &action.choices[0]);
        let bt = back.into_iter().next().unwrap();
        let z2 = predecessor(&z1, &action.choices[0], &bt).unwrap();
        // The regressed state must cover every ground instance of z's
        // extension that the choice applied to; spot check one.
        let d = GroundState::from_fluents(vec![
            fluent("on", &["b", "table"]),
            fluent("on", &["c", "b"]),
            fluent("e", &[]),
        ]);
        assert!(ground_membership(&d, &z));
        assert!(ground_membership(&d, &z2));
    }

    #[test]
    fn ground_apply_worked_case() {
        let action = pickup_action();
        let d = GroundState::from_fluents(vec![
            fluent("on", &["c", "b"]),
            fluent("on", &["b", "table"]),
            fluent("e", &[]),
        ]);
        let theta = subst(&[("X", "c"), ("Y", "b")]);
        let d1 = ground_apply(&d, &action.choices[0], &theta).unwrap();
        assert_eq!(
            d1,
            GroundState::from_fluents(vec![
                fluent("on", &["b", "table"]),
                fluent("holding", &["c"]),
            ])
        );
        // No-op failure leaves the state unchanged.
        let d2 = ground_apply(&d, &action.choices[1], &theta).unwrap();
        assert_eq!(d2, d);
    }

    #[test]
    fn ground_apply_respects_negated_preconditions() {
        let action = pickup_action();
        // Something on b: pickup(b, table) must fail.
        let d = GroundState::from_fluents(vec![
            fluent("on", &["c", "b"]),
            fluent("on", &["b", "table"]),
            fluent("e", &[]),
        ]);
        let theta = subst(&[("X", "b"), ("Y", "table")]);
        assert!(ground_apply(&d, &action.choices[0], &theta).is_err());
        assert!(!ground_applicable(&d, &action.choices[0], &theta));
    }

    #[test]
    fn ground_substs_enumerate_applicable_instances() {
        let action = pickup_action();
        let d = GroundState::from_fluents(vec![
            fluent("on", &["c", "b"]),
            fluent("on", &["b", "table"]),
            fluent("e", &[]),
        ]);
        let universe = d.constants();
        let substs = ground_applicable_substs(&d, &action, &universe);
        assert_eq!(substs, vec![subst(&[("X", "c"), ("Y", "b")])]);
    }

    #[test]
    fn reward_lookup_by_subsumption() {
        let model = RewardModel {
            rules: vec![RewardRule {
                condition: CNState::positive_only(ft(&[fluent("on", &["X", "a"])])),
                value: 500.0,
                absorbing: true,
            }],
            default_value: 0.0,
        };
        let goal = CNState::positive_only(ft(&[
            fluent("on", &["d", "a"]),
            fluent("on", &["a", "table"]),
        ]));
        assert_eq!(model.reward(&goal), 500.0);
        assert!(model.is_absorbing(&goal));

        let not_goal = CNState::positive_only(ft(&[fluent("holding", &["c"])]));
        assert_eq!(model.reward(&not_goal), 0.0);

        let empty = RewardModel::constant(7.0);
        assert_eq!(empty.reward(&not_goal), 7.0);
        assert_eq!(empty.max_reward(), 7.0);
    }

    #[test]
    fn reward_agreement_over_extension() {
        // Whenever a rule's condition subsumes Z, every ground member of Z
        // gets the same reward from the ground mirror.
        let model = RewardModel {
            rules: vec![RewardRule {
                condition: CNState::positive_only(ft(&[fluent("on", &["X", "a"])])),
                value: 500.0,
                absorbing: true,
            }],
            default_value: 0.0,
        };
        let z = CNState::positive_only(ft(&[
            fluent("on", &["d", "a"]),
            fluent("on", &["a", "table"]),
        ]));
        assert_eq!(model.reward(&z), 500.0);
        // Enumerate extensions of Z's positive part by extra atoms over a
        // small universe.
        let objects = ["a", "c", "d"];
        let mut pool = vec![Fluent::nullary("e")];
        for &x in &objects {
            pool.push(fluent("holding", &[x]));
            pool.push(fluent("on", &[x, "table"]));
            for &y in &objects {
                if x != y {
                    pool.push(fluent("on", &[x, y]));
                }
            }
        }
        let base: Vec<Fluent> = z.positive.iter().cloned().collect();
        for mask in 0..(1usize << 6) {
            let mut atoms = base.clone();
            for (i, f) in pool.iter().take(6).enumerate() {
                if mask & (1 << i) != 0 && !atoms.contains(f) {
                    atoms.push(f.clone());
                }
            }
            let d = GroundState::from_fluents(atoms);
            if ground_membership(&d, &z) {
                assert_eq!(model.reward_ground(&d), model.reward(&z), "at {d}");
            }
        }
    }

    /// Regression golden value, computed by hand: regressing a two-tower
    /// goal through the successful stack choice yields "holding the top
    /// block over the cleared bottom block".
    #[test]
    fn predecessor_of_rich_goal_through_stack() {
        let pre = CNState::positive_only(ft(&[
            fluent("holding", &["X"]),
            fluent("clear", &["Y"]),
        ]));
        let eff = CNState::positive_only(ft(&[
            fluent("e", &[]),
            fluent("clear", &["X"]),
            fluent("on", &["X", "Y"]),
        ]));
        let stack = StochasticAction {
            name: "stack".into(),
            params: vec!["X".into(), "Y".into()],
            choices: vec![NatureChoice {
                name: "stackS".into(),
                params: vec!["X".into(), "Y".into()],
                pre,
                eff,
                prob: 1.0,
            }],
            cost: -3.0,
        };
        let goal = CNState::positive_only(ft(&[
            fluent("e", &[]),
            fluent("clear", &["X1"]),
            fluent("on", &["X1", "X2"]),
            fluent("ontable", &["X2"]),
            fluent("col", &["X1", "c1"]),
            fluent("col", &["X2", "c2"]),
        ]))
        .canonical();
        let thetas = backward_applicable(&goal, &stack, &stack.choices[0]);
        assert_eq!(thetas.len(), 1);
        let theta = thetas.into_iter().next().unwrap();
        let regressed = predecessor(&goal, &stack.choices[0], &theta).unwrap();
        let expected = CNState::positive_only(ft(&[
            fluent("holding", &["X1"]),
            fluent("clear", &["X2"]),
            fluent("ontable", &["X2"]),
            fluent("col", &["X1", "c1"]),
            fluent("col", &["X2", "c2"]),
        ]))
        .canonical();
        assert_eq!(regressed, expected);
    }

    #[test]
    fn ground_reward_agrees() {
        let model = RewardModel {
            rules: vec![RewardRule {
                condition: CNState::positive_only(ft(&[fluent("on", &["X", "a"])])),
                value: 500.0,
                absorbing: true,
            }],
            default_value: 0.0,
        };
        let d = GroundState::from_fluents(vec![
            fluent("on", &["d", "a"]),
            fluent("on", &["a", "table"]),
        ]);
        assert_eq!(model.reward_ground(&d), 500.0);
        assert_eq!(model.reward_ground(&GroundState::empty()), 0.0);
    }
}

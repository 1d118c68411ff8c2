//! Domain and problem specifications with load-time validation.

use std::collections::{BTreeMap, BTreeSet};

use crate::action::{RewardModel, StochasticAction};
use crate::error::{Error, Result};
use crate::state::CNState;
use crate::term::GroundState;

pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// A declared fluent symbol with its fixed arity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FluentDecl {
    pub symbol: String,
    pub arity: usize,
}

/// A planning domain: fluent declarations, stochastic actions, the reward
/// model, and the discount factor.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub name: String,
    pub fluents: Vec<FluentDecl>,
    pub actions: Vec<StochasticAction>,
    pub reward: RewardModel,
    pub gamma: f64,
}

impl DomainSpec {
    pub fn action(&self, name: &str) -> Option<&StochasticAction> {
        self.actions.iter().find(|a| a.name == name)
    }

    fn arity_map(&self) -> BTreeMap<&str, usize> {
        self.fluents
            .iter()
            .map(|d| (d.symbol.as_str(), d.arity))
            .collect()
    }

    /// Check every invariant of the domain. Called by the parser; programmatic
    /// constructions should call it too.
    pub fn validate(&self) -> Result<()> {
        let arities = self.arity_map();
        for action in &self.actions {
            if action.choices.is_empty() {
                return Err(Error::validation(format!(
                    "action {} has no nature's choices",
                    action.name
                )));
            }
            let prob_sum: f64 = action.choices.iter().map(|c| c.prob).sum();
            if (prob_sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                return Err(Error::validation(format!(
                    "action {}: probabilities sum to {prob_sum}",
                    action.name
                )));
            }
            let shared = &action.choices[0].pre;
            for choice in &action.choices {
                if !(0.0..=1.0).contains(&choice.prob) {
                    return Err(Error::validation(format!(
                        "choice {} of {}: probability {} out of range",
                        choice.name, action.name, choice.prob
                    )));
                }
                if &choice.pre != shared {
                    return Err(Error::validation(format!(
                        "choice {} of {} does not share the action precondition",
                        choice.name, action.name
                    )));
                }
                self.check_state(&choice.pre, &arities, "precondition", &action.name)?;
                self.check_state(&choice.eff, &arities, "effect", &action.name)?;
                let mut allowed: BTreeSet<String> = choice.pre.vars();
                allowed.extend(action.params.iter().cloned());
                let stray: Vec<String> = choice
                    .eff
                    .vars()
                    .difference(&allowed)
                    .cloned()
                    .collect();
                if !stray.is_empty() {
                    return Err(Error::validation(format!(
                        "choice {} of {}: effect variables {stray:?} not bound by \
                         precondition or parameters",
                        choice.name, action.name
                    )));
                }
            }
        }
        for rule in &self.reward.rules {
            self.check_state(&rule.condition, &arities, "reward condition", &self.name)?;
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::validation(format!(
                "discount factor {} out of [0, 1]",
                self.gamma
            )));
        }
        if self.gamma == 1.0 && !self.reward.has_absorbing_rule() {
            return Err(Error::validation(
                "gamma = 1 requires at least one absorbing reward rule".to_string(),
            ));
        }
        Ok(())
    }

    fn check_state(
        &self,
        z: &CNState,
        arities: &BTreeMap<&str, usize>,
        what: &str,
        owner: &str,
    ) -> Result<()> {
        for f in z.positive.iter().chain(z.negations.iter().flat_map(|n| n.iter())) {
            match arities.get(f.symbol.as_str()) {
                None => {
                    return Err(Error::validation(format!(
                        "{what} of {owner}: undeclared fluent {}",
                        f.symbol
                    )))
                }
                Some(&a) if a != f.arity() => {
                    return Err(Error::validation(format!(
                        "{what} of {owner}: fluent {} has arity {}, declared {a}",
                        f.symbol,
                        f.arity()
                    )))
                }
                _ => {}
            }
        }
        for n in &z.negations {
            if n.is_empty() {
                return Err(Error::validation(format!(
                    "{what} of {owner}: negated member must not be the unit 1"
                )));
            }
        }
        Ok(())
    }
}

/// A problem: named domain, ground initial states, and a simulation step cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: String,
    pub initial_states: Vec<GroundState>,
    pub horizon: usize,
}

impl ProblemSpec {
    pub fn validate(&self, dom: &DomainSpec) -> Result<()> {
        if self.domain != dom.name {
            return Err(Error::validation(format!(
                "problem {} names domain {}, loaded domain is {}",
                self.name, self.domain, dom.name
            )));
        }
        if self.initial_states.is_empty() {
            return Err(Error::validation(
                "problem has no initial states".to_string(),
            ));
        }
        if self.horizon == 0 {
            return Err(Error::validation("horizon must be positive".to_string()));
        }
        let arities = dom.arity_map();
        for d in &self.initial_states {
            for f in d.fluents() {
                match arities.get(f.symbol.as_str()) {
                    None => {
                        return Err(Error::validation(format!(
                            "initial state uses undeclared fluent {}",
                            f.symbol
                        )))
                    }
                    Some(&a) if a != f.arity() => {
                        return Err(Error::validation(format!(
                            "initial state: fluent {} has arity {}, declared {a}",
                            f.symbol,
                            f.arity()
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Constants mentioned in the initial states: the Herbrand object
    /// universe used by the ground oracle.
    pub fn universe(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for d in &self.initial_states {
            out.extend(d.constants());
        }
        out
    }
}

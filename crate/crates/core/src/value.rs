//! Value functions and policies over canonical CN-states, with their textual
//! serialization formats.
//!
//! A value function is an ordered decision list: lookup tries an exact
//! canonical match first, then the first entry whose state subsumes the
//! query, then the default. Ground lookups mirror this with extension
//! membership in place of subsumption.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::state::{ground_membership, subsumes, CNState};
use crate::syntax::{parse_cn_state_str, parse_subst_str, subst_to_compact};
use crate::term::{GroundState, Substitution};

#[derive(Debug, Clone)]
pub struct ValueFunction {
    entries: Vec<(CNState, f64)>,
    index: BTreeMap<CNState, usize>,
    pub default_value: f64,
}

impl ValueFunction {
    pub fn new(default_value: f64) -> ValueFunction {
        ValueFunction {
            entries: Vec::new(),
            index: BTreeMap::new(),
            default_value,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(CNState, f64)> {
        self.entries.iter()
    }

    pub fn states(&self) -> impl Iterator<Item = &CNState> {
        self.entries.iter().map(|(z, _)| z)
    }

    /// Insert or update the entry for a canonical state. New states append
    /// to the end of the decision list.
    pub fn set(&mut self, state: CNState, value: f64) {
        match self.index.get(&state) {
            Some(&i) => self.entries[i].1 = value,
            None => {
                self.index.insert(state.clone(), self.entries.len());
                self.entries.push((state, value));
            }
        }
    }

    pub fn exact(&self, state: &CNState) -> Option<f64> {
        self.index.get(state).map(|&i| self.entries[i].1)
    }

    /// Decision-list lookup for an abstract state.
    pub fn lookup(&self, state: &CNState) -> f64 {
        if let Some(v) = self.exact(state) {
            return v;
        }
        for (z, v) in &self.entries {
            if subsumes(z, state) {
                return *v;
            }
        }
        self.default_value
    }

    /// Decision-list lookup for a ground state: exact match of its lift,
    /// then the first entry whose extension contains it, then the default.
    pub fn lookup_ground(&self, d: &GroundState) -> f64 {
        if let Some(v) = self.exact(&CNState::lift(d).canonical()) {
            return v;
        }
        for (z, v) in &self.entries {
            if ground_membership(d, z) {
                return *v;
            }
        }
        self.default_value
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# fluent-mdp value function\n");
        out.push_str(&format!("default {}\n", self.default_value));
        for (z, v) in &self.entries {
            out.push_str(&format!("{z}\t{v}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<ValueFunction> {
        let mut vf = ValueFunction::new(0.0);
        let mut saw_default = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("default ") {
                vf.default_value = rest.trim().parse::<f64>().map_err(|_| {
                    Error::parse(line_no, 1, format!("malformed default value `{rest}`"))
                })?;
                saw_default = true;
                continue;
            }
            let mut parts = raw.split('\t');
            let (Some(state), Some(value)) = (parts.next(), parts.next()) else {
                return Err(Error::parse(
                    line_no,
                    1,
                    "expected `<state>\\t<value>`".to_string(),
                ));
            };
            let z = parse_cn_state_str(state, line_no)?.canonical();
            let v = value.trim().parse::<f64>().map_err(|_| {
                Error::parse(line_no, 1, format!("malformed value `{value}`"))
            })?;
            vf.set(z, v);
        }
        if !saw_default {
            return Err(Error::parse(1, 1, "missing `default <value>` line"));
        }
        Ok(vf)
    }
}

/// One policy decision: at states covered by `state`, run `action` under
/// `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEntry {
    pub state: CNState,
    pub action: String,
    pub theta: Substitution,
}

#[derive(Debug, Clone, Default)]
pub struct Policy {
    entries: Vec<PolicyEntry>,
    index: BTreeMap<CNState, usize>,
}

impl Policy {
    pub fn new() -> Policy {
        Policy::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PolicyEntry> {
        self.entries.iter()
    }

    pub fn set(&mut self, entry: PolicyEntry) {
        match self.index.get(&entry.state) {
            Some(&i) => self.entries[i] = entry,
            None => {
                self.index.insert(entry.state.clone(), self.entries.len());
                self.entries.push(entry);
            }
        }
    }

    pub fn get(&self, state: &CNState) -> Option<&PolicyEntry> {
        self.index.get(state).map(|&i| &self.entries[i])
    }

    /// The entry covering a ground state: exact match of its lift, else the
    /// first entry whose extension contains it.
    pub fn lookup_ground(&self, d: &GroundState) -> Option<&PolicyEntry> {
        if let Some(e) = self.get(&CNState::lift(d).canonical()) {
            return Some(e);
        }
        self.entries.iter().find(|e| ground_membership(d, &e.state))
    }

    /// Absorb entries from another policy, overriding on shared states.
    pub fn merge(&mut self, other: Policy) {
        for entry in other.entries {
            self.set(entry);
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# fluent-mdp policy\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                e.state,
                e.action,
                subst_to_compact(&e.theta)
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Policy> {
        let mut policy = Policy::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = raw.split('\t');
            let (Some(state), Some(action), Some(theta)) =
                (parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::parse(
                    line_no,
                    1,
                    "expected `<state>\\t<action>\\t<theta>`".to_string(),
                ));
            };
            policy.set(PolicyEntry {
                state: parse_cn_state_str(state, line_no)?.canonical(),
                action: action.trim().to_string(),
                theta: parse_subst_str(theta, line_no)?,
            });
        }
        Ok(policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{Fluent, FluentTerm, Term};

    fn fluent(symbol: &str, args: &[&str]) -> Fluent {
        Fluent::new(symbol, args.iter().map(|a| Term::from_name(a)).collect())
    }

    fn state(fluents: &[Fluent]) -> CNState {
        CNState::positive_only(FluentTerm::from_fluents(fluents.to_vec())).canonical()
    }

    #[test]
    fn lookup_prefers_exact_then_list_order_then_default() {
        let mut vf = ValueFunction::new(7.0);
        let goalish = state(&[fluent("on", &["X", "a"])]);
        vf.set(goalish.clone(), 500.0);
        let specific = state(&[fluent("on", &["d", "a"]), fluent("e", &[])]);
        vf.set(specific.clone(), 100.0);

        // Exact beats the earlier subsuming entry.
        assert_eq!(vf.lookup(&specific), 100.0);
        // Subsumption: covered by the first entry.
        let other = state(&[fluent("on", &["c", "a"])]);
        assert_eq!(vf.lookup(&other), 500.0);
        // Nothing matches: default.
        let miss = state(&[fluent("holding", &["c"])]);
        assert_eq!(vf.lookup(&miss), 7.0);
    }

    #[test]
    fn ground_lookup_mirrors_abstract() {
        let mut vf = ValueFunction::new(0.0);
        vf.set(state(&[fluent("on", &["X", "a"])]), 500.0);
        let d = GroundState::from_fluents(vec![
            fluent("on", &["d", "a"]),
            fluent("on", &["a", "table"]),
        ]);
        assert_eq!(vf.lookup_ground(&d), 500.0);
        let exact = GroundState::from_fluents(vec![fluent("holding", &["c"])]);
        vf.set(CNState::lift(&exact).canonical(), 42.0);
        assert_eq!(vf.lookup_ground(&exact), 42.0);
    }

    #[test]
    fn value_text_round_trip() {
        let mut vf = ValueFunction::new(500.0);
        vf.set(state(&[fluent("on", &["X", "a"])]), 500.0);
        vf.set(
            CNState::new(
                FluentTerm::from_fluents(vec![fluent("holding", &["X"])]),
                vec![FluentTerm::from_fluents(vec![fluent("on", &["W", "X"])])],
            )
            .canonical(),
            497.0,
        );
        let text = vf.to_text();
        let back = ValueFunction::from_text(&text).unwrap();
        assert_eq!(back.default_value, 500.0);
        assert_eq!(back.len(), 2);
        for (z, v) in vf.iter() {
            assert_eq!(back.exact(z), Some(*v));
        }
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn policy_text_round_trip_and_ground_lookup() {
        let mut policy = Policy::new();
        let z = state(&[
            fluent("ontable", &["b1"]),
            fluent("clear", &["b1"]),
            fluent("e", &[]),
        ]);
        policy.set(PolicyEntry {
            state: z.clone(),
            action: "pickup".into(),
            theta: Substitution::from_pairs([("X".to_string(), Term::constant("b1"))]),
        });
        let text = policy.to_text();
        let back = Policy::from_text(&text).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back.get(&z).unwrap().action, "pickup");

        let d = GroundState::from_fluents(vec![
            fluent("ontable", &["b1"]),
            fluent("clear", &["b1"]),
            fluent("e", &[]),
        ]);
        assert_eq!(back.lookup_ground(&d).unwrap().action, "pickup");
    }
}

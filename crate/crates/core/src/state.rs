//! CN-states: abstract states made of a positive fluent term and a set of
//! negated fluent terms.
//!
//! A ground state `d` belongs to the extension of `(P, N)` when some
//! substitution embeds `P` into `d` and, under that substitution, no member
//! of `N` has an instance inside `d`. Variables occurring only inside a
//! negation member are existential within that member; variables shared with
//! `P` are bound by `P`'s match.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::matching::{match_exists, match_into};
use crate::term::{FluentTerm, GroundState, Substitution, Term};

/// Above this many variables the canonical renaming search falls back to a
/// deterministic first-occurrence order instead of the minimizing search.
const CANON_VAR_LIMIT: usize = 7;

/// An abstract state: positive part `P` plus negated fluent terms `N`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CNState {
    pub positive: FluentTerm,
    pub negations: Vec<FluentTerm>,
}

impl CNState {
    pub fn new(positive: FluentTerm, mut negations: Vec<FluentTerm>) -> CNState {
        negations.sort();
        CNState {
            positive,
            negations,
        }
    }

    /// The universal state `(1, {})`.
    pub fn universal() -> CNState {
        CNState::new(FluentTerm::unit(), Vec::new())
    }

    pub fn positive_only(positive: FluentTerm) -> CNState {
        CNState::new(positive, Vec::new())
    }

    /// Lift a ground state to the abstract state with that positive part and
    /// no negations. The lifted state's extension contains the ground state.
    pub fn lift(d: &GroundState) -> CNState {
        CNState::positive_only(d.to_term())
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = self.positive.vars();
        for n in &self.negations {
            out.extend(n.vars());
        }
        out
    }

    pub fn positive_vars(&self) -> BTreeSet<String> {
        self.positive.vars()
    }

    pub fn apply(&self, theta: &Substitution) -> CNState {
        CNState::new(
            theta.apply_fluent_term(&self.positive),
            self.negations
                .iter()
                .map(|n| theta.apply_fluent_term(n))
                .collect(),
        )
    }

    pub fn is_ground(&self) -> bool {
        self.positive.is_ground() && self.negations.iter().all(FluentTerm::is_ground)
    }

    pub fn canonical(&self) -> CNState {
        canonicalize(self)
    }
}

impl fmt::Display for CNState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.positive)?;
        for n in &self.negations {
            write!(f, " ; not {n}")?;
        }
        Ok(())
    }
}

/// Membership of a ground state in the extension of an abstract state.
pub fn ground_membership(d: &GroundState, z: &CNState) -> bool {
    let target = d.to_term();
    for theta in match_into(&z.positive, &target) {
        let violated = z
            .negations
            .iter()
            .any(|n| match_exists(&theta.apply_fluent_term(n), &target));
        if !violated {
            return true;
        }
    }
    false
}

/// Sound syntactic subsumption test: `true` implies the extension of `z2` is
/// contained in the extension of `z1`. May answer `false` on semantically
/// subsumed pairs.
pub fn subsumes(z1: &CNState, z2: &CNState) -> bool {
    let z1 = rename_apart(z1, &z2.vars());
    for theta in match_into(&z1.positive, &z2.positive) {
        let all_covered = z1.negations.iter().all(|n1| {
            let rhs = z2.positive.compose(&theta.apply_fluent_term(n1));
            z2.negations
                .iter()
                .any(|n2| match_exists(&z2.positive.compose(n2), &rhs))
        });
        if all_covered {
            return true;
        }
    }
    false
}

/// Fresh names for the variables in `vars` that clash with `avoid`. The
/// fresh names avoid both sets. Deterministic.
pub fn rename_apart_map(
    vars: &BTreeSet<String>,
    avoid: &BTreeSet<String>,
) -> BTreeMap<String, String> {
    let clashing: Vec<String> = vars.intersection(avoid).cloned().collect();
    let mut map = BTreeMap::new();
    if clashing.is_empty() {
        return map;
    }
    let taken: BTreeSet<String> = vars.union(avoid).cloned().collect();
    let mut counter = 1usize;
    for var in clashing {
        let fresh = loop {
            let candidate = format!("V{counter}");
            counter += 1;
            if !taken.contains(&candidate) {
                break candidate;
            }
        };
        map.insert(var, fresh);
    }
    map
}

/// Rename the variables of `z` that clash with `avoid` to fresh names.
pub fn rename_apart(z: &CNState, avoid: &BTreeSet<String>) -> CNState {
    let map = rename_apart_map(&z.vars(), avoid);
    if map.is_empty() {
        return z.clone();
    }
    let renaming = Substitution::from_pairs(
        map.into_iter().map(|(from, to)| (from, Term::var(to))),
    );
    z.apply(&renaming)
}

/// Equality of two negation members up to bijective renaming of their local
/// variables; variables in `fixed` must match identically.
pub(crate) fn variant_members_eq(
    a: &FluentTerm,
    b: &FluentTerm,
    fixed: &BTreeSet<String>,
) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let locals_a: Vec<String> = a.vars().difference(fixed).cloned().collect();
    let locals_b: Vec<String> = b.vars().difference(fixed).cloned().collect();
    if locals_a.len() != locals_b.len() {
        return false;
    }
    if locals_a.is_empty() {
        return a == b;
    }
    if locals_a.len() > CANON_VAR_LIMIT {
        return a == b;
    }
    permutations(locals_b.len()).into_iter().any(|perm| {
        let renaming = Substitution::from_pairs(
            locals_a
                .iter()
                .zip(perm.iter())
                .map(|(va, &i)| (va.clone(), Term::var(locals_b[i].clone()))),
        );
        &renaming.apply_fluent_term(a) == b
    })
}

/// Canonical form: fluents in the fixed total order, variables renamed to a
/// fixed alphabet, negation members deduplicated up to variance. Two states
/// are variants exactly when their canonical forms are equal.
pub fn canonicalize(z: &CNState) -> CNState {
    // Empty negation members would make the extension empty; loaders reject
    // them and the successor/predecessor operators never create them.
    let members: Vec<&FluentTerm> = z.negations.iter().filter(|n| !n.is_empty()).collect();
    let p_vars: Vec<String> = z.positive.vars().into_iter().collect();
    let p_var_set: BTreeSet<String> = p_vars.iter().cloned().collect();

    let orderings: Vec<Vec<usize>> = if p_vars.len() <= CANON_VAR_LIMIT {
        permutations(p_vars.len())
    } else {
        vec![(0..p_vars.len()).collect()]
    };

    let mut best: Option<CNState> = None;
    for perm in orderings {
        let rho = Substitution::from_pairs(
            perm.iter()
                .enumerate()
                .map(|(i, &v)| (p_vars[v].clone(), Term::var(format!("X{}", i + 1)))),
        );
        let positive = rho.apply_fluent_term(&z.positive);
        let mut negs: Vec<FluentTerm> = members
            .iter()
            .map(|m| canonical_member(m, &rho, &p_var_set))
            .collect();
        negs.sort();
        negs.dedup();
        let candidate = CNState {
            positive,
            negations: negs,
        };
        if best.as_ref().is_none_or(|b| candidate < *b) {
            best = Some(candidate);
        }
    }
    best.unwrap_or_else(|| CNState::new(z.positive.clone(), Vec::new()))
}

/// Canonical rendering of a single negation member: shared variables renamed
/// by `rho`, member-local variables renamed to `Y1..Ym` minimizing the
/// resulting term.
fn canonical_member(
    member: &FluentTerm,
    rho: &Substitution,
    p_vars: &BTreeSet<String>,
) -> FluentTerm {
    let locals: Vec<String> = member.vars().difference(p_vars).cloned().collect();
    if locals.is_empty() {
        return rho.apply_fluent_term(member);
    }
    let orderings: Vec<Vec<usize>> = if locals.len() <= CANON_VAR_LIMIT {
        permutations(locals.len())
    } else {
        vec![(0..locals.len()).collect()]
    };
    orderings
        .into_iter()
        .map(|perm| {
            let mut renaming = rho.clone();
            for (i, &v) in perm.iter().enumerate() {
                renaming.bind(locals[v].clone(), Term::var(format!("Y{}", i + 1)));
            }
            renaming.apply_fluent_term(member)
        })
        .min()
        .expect("at least one ordering")
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut current: Vec<usize> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    fn rec(n: usize, current: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if current.len() == n {
            out.push(current.clone());
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                current.push(i);
                rec(n, current, used, out);
                current.pop();
                used[i] = false;
            }
        }
    }
    rec(n, &mut current, &mut used, &mut out);
    out
}

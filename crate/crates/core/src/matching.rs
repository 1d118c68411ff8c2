//! One-sided multiset matching.
//!
//! `match_into` finds every substitution over the pattern's variables that
//! embeds the pattern into the target as a sub-multiset. Variables in the
//! target are rigid: a pattern variable may bind to them, but they are never
//! bound themselves.

use std::collections::BTreeSet;

use crate::term::{Fluent, FluentTerm, Substitution, Term};

/// All substitutions theta such that `pattern . theta` is a sub-multiset of
/// `target`. Each returned substitution binds exactly the pattern's
/// variables. The empty pattern matches everything with the empty
/// substitution.
pub fn match_into(pattern: &FluentTerm, target: &FluentTerm) -> BTreeSet<Substitution> {
    match_into_with(pattern, target, &pattern.vars())
}

/// [`match_into`] with an explicit set of bindable variables; pattern
/// variables outside `bindable` are rigid.
pub(crate) fn match_into_with(
    pattern: &FluentTerm,
    target: &FluentTerm,
    bindable: &BTreeSet<String>,
) -> BTreeSet<Substitution> {
    let mut out = BTreeSet::new();
    let mut used = vec![false; target.len()];
    search(
        pattern.fluents(),
        target.fluents(),
        bindable,
        &mut used,
        &Substitution::empty(),
        &mut out,
        false,
    );
    out
}

/// Like [`match_into`] but stops at the first embedding.
pub fn match_exists(pattern: &FluentTerm, target: &FluentTerm) -> bool {
    let bindable = pattern.vars();
    let mut out = BTreeSet::new();
    let mut used = vec![false; target.len()];
    search(
        pattern.fluents(),
        target.fluents(),
        &bindable,
        &mut used,
        &Substitution::empty(),
        &mut out,
        true,
    )
}

#[allow(clippy::too_many_arguments)]
fn search(
    pats: &[Fluent],
    target: &[Fluent],
    bindable: &BTreeSet<String>,
    used: &mut [bool],
    theta: &Substitution,
    out: &mut BTreeSet<Substitution>,
    stop_at_first: bool,
) -> bool {
    let Some((pat, rest)) = pats.split_first() else {
        out.insert(theta.clone());
        return true;
    };
    if pats.len() > target.len() - used.iter().filter(|u| **u).count() {
        return false;
    }
    let pat = theta.apply_fluent(pat);
    for j in 0..target.len() {
        if used[j] {
            continue;
        }
        // Identical target occurrences yield identical matches; trying the
        // first unused one is enough.
        if j > 0 && target[j] == target[j - 1] && !used[j - 1] {
            continue;
        }
        let Some(extended) = match_fluent(&pat, &target[j], bindable, theta) else {
            continue;
        };
        used[j] = true;
        let found = search(rest, target, bindable, used, &extended, out, stop_at_first);
        used[j] = false;
        if found && stop_at_first {
            return true;
        }
    }
    false
}

/// Match a single pattern fluent against a single target fluent, extending
/// `theta`. The pattern fluent is assumed to already have `theta` applied, so
/// it may contain target-side variables (images of earlier bindings); those
/// are rigid, like constants.
fn match_fluent(
    pat: &Fluent,
    tgt: &Fluent,
    bindable: &BTreeSet<String>,
    theta: &Substitution,
) -> Option<Substitution> {
    if pat.symbol != tgt.symbol || pat.arity() != tgt.arity() {
        return None;
    }
    let mut extended = theta.clone();
    for (p, t) in pat.args.iter().zip(tgt.args.iter()) {
        match p {
            Term::Const(_) => {
                if p != t {
                    return None;
                }
            }
            Term::Var(v) if !bindable.contains(v) => {
                if p != t {
                    return None;
                }
            }
            Term::Var(v) => match extended.get(v) {
                Some(bound) => {
                    if bound != t {
                        return None;
                    }
                }
                None => extended.bind(v.clone(), t.clone()),
            },
        }
    }
    Some(extended)
}

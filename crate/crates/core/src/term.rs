//! Terms, fluents, fluent terms, substitutions, and ground states.
//!
//! A fluent term is a finite multiset of fluents: the binary composition is
//! multiset union, associative and commutative with the empty multiset as
//! unit. `FluentTerm` keeps its fluents sorted so that structural equality
//! coincides with multiset equality.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Prolog-style lexical rule: identifiers starting with an uppercase letter
/// are variables, everything else names a constant or symbol.
pub fn is_variable_name(name: &str) -> bool {
    name.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

/// Either a variable or a constant. Constants order before variables, which
/// gives the canonical fluent order "variables after constants".
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(String),
    Var(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Term {
        Term::Const(name.into())
    }

    /// Classify a raw identifier by the lexical rule.
    pub fn from_name(name: &str) -> Term {
        if is_variable_name(name) {
            Term::Var(name.to_string())
        } else {
            Term::Const(name.to_string())
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Const(n) | Term::Var(n) => n,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// A fluent: a symbol applied to terms, e.g. `on(a, B)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fluent {
    pub symbol: String,
    pub args: Vec<Term>,
}

impl Fluent {
    pub fn new(symbol: impl Into<String>, args: Vec<Term>) -> Fluent {
        Fluent {
            symbol: symbol.into(),
            args,
        }
    }

    pub fn nullary(symbol: impl Into<String>) -> Fluent {
        Fluent::new(symbol, Vec::new())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        for arg in &self.args {
            if let Term::Var(v) = arg {
                out.insert(v.clone());
            }
        }
    }
}

// Canonical order: symbol name, then arity, then arguments (constants
// before variables by the Term ordering).
impl Ord for Fluent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.symbol
            .cmp(&other.symbol)
            .then_with(|| self.arity().cmp(&other.arity()))
            .then_with(|| self.args.cmp(&other.args))
    }
}

impl PartialOrd for Fluent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Fluent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            return write!(f, "{}", self.symbol);
        }
        write!(f, "{}(", self.symbol)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{arg}")?;
        }
        write!(f, ")")
    }
}

/// A finite multiset of fluents. The empty multiset is the unit of the
/// composition and prints as `1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FluentTerm {
    fluents: Vec<Fluent>,
}

impl FluentTerm {
    /// The unit element: the empty multiset.
    pub fn unit() -> FluentTerm {
        FluentTerm::default()
    }

    pub fn from_fluents(mut fluents: Vec<Fluent>) -> FluentTerm {
        fluents.sort();
        FluentTerm { fluents }
    }

    pub fn singleton(fluent: Fluent) -> FluentTerm {
        FluentTerm {
            fluents: vec![fluent],
        }
    }

    /// Multiset union of the two terms.
    pub fn compose(&self, other: &FluentTerm) -> FluentTerm {
        let mut fluents = Vec::with_capacity(self.fluents.len() + other.fluents.len());
        let (mut i, mut j) = (0, 0);
        while i < self.fluents.len() && j < other.fluents.len() {
            if self.fluents[i] <= other.fluents[j] {
                fluents.push(self.fluents[i].clone());
                i += 1;
            } else {
                fluents.push(other.fluents[j].clone());
                j += 1;
            }
        }
        fluents.extend_from_slice(&self.fluents[i..]);
        fluents.extend_from_slice(&other.fluents[j..]);
        FluentTerm { fluents }
    }

    pub fn len(&self) -> usize {
        self.fluents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fluents.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Fluent> {
        self.fluents.iter()
    }

    pub fn fluents(&self) -> &[Fluent] {
        &self.fluents
    }

    pub fn is_ground(&self) -> bool {
        self.fluents.iter().all(Fluent::is_ground)
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for f in &self.fluents {
            f.collect_vars(&mut out);
        }
        out
    }

    /// Multiset difference; `None` when `other` is not a sub-multiset of
    /// `self`.
    pub fn minus(&self, other: &FluentTerm) -> Option<FluentTerm> {
        let mut fluents = Vec::with_capacity(self.fluents.len());
        let mut j = 0;
        for f in &self.fluents {
            if j < other.fluents.len() {
                match f.cmp(&other.fluents[j]) {
                    Ordering::Equal => {
                        j += 1;
                        continue;
                    }
                    Ordering::Greater => return None,
                    Ordering::Less => {}
                }
            }
            fluents.push(f.clone());
        }
        if j == other.fluents.len() {
            Some(FluentTerm { fluents })
        } else {
            None
        }
    }

    pub fn is_submultiset_of(&self, other: &FluentTerm) -> bool {
        other.minus(self).is_some()
    }
}

impl From<Fluent> for FluentTerm {
    fn from(fluent: Fluent) -> FluentTerm {
        FluentTerm::singleton(fluent)
    }
}

impl fmt::Display for FluentTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.fluents.is_empty() {
            return write!(f, "1");
        }
        for (i, fluent) in self.fluents.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{fluent}")?;
        }
        Ok(())
    }
}

/// A substitution: a finite map from variable names to terms. Kept
/// idempotent by construction (bound variables never occur in images).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Substitution {
    bindings: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn empty() -> Substitution {
        Substitution::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Term)>) -> Substitution {
        Substitution {
            bindings: pairs.into_iter().collect(),
        }
    }

    pub fn bind(&mut self, var: impl Into<String>, term: Term) {
        self.bindings.insert(var.into(), term);
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.bindings.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &String> {
        self.bindings.keys()
    }

    pub fn apply_term(&self, term: &Term) -> Term {
        match term {
            Term::Var(v) => self.bindings.get(v).cloned().unwrap_or_else(|| term.clone()),
            Term::Const(_) => term.clone(),
        }
    }

    pub fn apply_fluent(&self, fluent: &Fluent) -> Fluent {
        Fluent {
            symbol: fluent.symbol.clone(),
            args: fluent.args.iter().map(|t| self.apply_term(t)).collect(),
        }
    }

    pub fn apply_fluent_term(&self, term: &FluentTerm) -> FluentTerm {
        FluentTerm::from_fluents(term.iter().map(|f| self.apply_fluent(f)).collect())
    }

    /// Sequential composition: apply `self` first, then `later`. Images of
    /// `self` are rewritten by `later`; bindings of `later` on variables not
    /// bound by `self` are kept.
    pub fn compose(&self, later: &Substitution) -> Substitution {
        let mut bindings: BTreeMap<String, Term> = self
            .bindings
            .iter()
            .map(|(v, t)| (v.clone(), later.apply_term(t)))
            .collect();
        for (v, t) in &later.bindings {
            bindings.entry(v.clone()).or_insert_with(|| t.clone());
        }
        Substitution { bindings }
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (v, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}={t}")?;
        }
        write!(f, "}}")
    }
}

/// A ground state: a finite multiset of variable-free fluents. These are the
/// elements of the interpretation domain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct GroundState {
    fluents: Vec<Fluent>,
}

impl GroundState {
    pub fn from_fluents(fluents: Vec<Fluent>) -> GroundState {
        debug_assert!(fluents.iter().all(Fluent::is_ground));
        let term = FluentTerm::from_fluents(fluents);
        GroundState {
            fluents: term.fluents,
        }
    }

    pub fn empty() -> GroundState {
        GroundState::default()
    }

    pub fn to_term(&self) -> FluentTerm {
        FluentTerm {
            fluents: self.fluents.clone(),
        }
    }

    pub fn fluents(&self) -> &[Fluent] {
        &self.fluents
    }

    pub fn len(&self) -> usize {
        self.fluents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fluents.is_empty()
    }

    /// Constants occurring as arguments anywhere in the state.
    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for f in &self.fluents {
            for arg in &f.args {
                if let Term::Const(c) = arg {
                    out.insert(c.clone());
                }
            }
        }
        out
    }
}

impl From<FluentTerm> for GroundState {
    fn from(term: FluentTerm) -> GroundState {
        debug_assert!(term.is_ground());
        GroundState {
            fluents: term.fluents,
        }
    }
}

impl fmt::Display for GroundState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

//! Symbolic solver for first-order Markov decision processes.
//!
//! States are abstract CN-states over a fluent-calculus term algebra:
//! a positive multiset of fluents plus negated fluent terms. Dynamic
//! programming (value iteration and LAO*-style heuristic search) runs
//! directly on these abstract states without grounding the problem, and a
//! brute-force ground MDP oracle cross-checks the results on small
//! instances.

pub mod action;
pub mod blocksworld;
pub mod domain;
pub mod error;
pub mod folao;
pub mod fovia;
pub mod matching;
pub mod oracle;
pub mod sim;
pub mod state;
pub mod syntax;
pub mod term;
pub mod value;

pub use action::{NatureChoice, RewardModel, RewardRule, StochasticAction};
pub use domain::{DomainSpec, FluentDecl, ProblemSpec};
pub use error::{Error, Result};
pub use state::CNState;
pub use value::{Policy, PolicyEntry, ValueFunction};
pub use term::{Fluent, FluentTerm, GroundState, Substitution, Term};

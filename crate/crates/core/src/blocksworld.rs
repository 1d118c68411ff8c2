//! Colored Blocksworld instance generator.
//!
//! Blocks carry colors; the goal asks for a tower whose colors match a given
//! sequence, not for specific blocks. Encoded as pure multiset rewriting:
//! the four usual actions consume and produce `clear`/`e` tokens, so no
//! negated preconditions are needed and mutual exclusion (one gripper, no
//! self-stacking) falls out of the token bookkeeping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::action::{NatureChoice, RewardModel, RewardRule, StochasticAction};
use crate::domain::{DomainSpec, FluentDecl, ProblemSpec};
use crate::error::{Error, Result};
use crate::state::CNState;
use crate::term::{Fluent, FluentTerm, GroundState, Term};

#[derive(Debug, Clone)]
pub struct BwConfig {
    pub blocks: usize,
    pub colors: usize,
    pub seed: u64,
    /// Reward for reaching the goal arrangement.
    pub goal_reward: f64,
    /// Cost charged per action.
    pub action_cost: f64,
    /// Probability that an action succeeds; failures are no-ops.
    pub success_prob: f64,
    pub gamma: f64,
    pub horizon: usize,
}

impl BwConfig {
    pub fn new(blocks: usize, colors: usize, seed: u64) -> BwConfig {
        BwConfig {
            blocks,
            colors,
            seed,
            goal_reward: 500.0,
            action_cost: -3.0,
            success_prob: 0.75,
            gamma: 1.0,
            horizon: 1000,
        }
    }
}

fn var(name: &str) -> Term {
    Term::var(name)
}

fn cst(name: &str) -> Term {
    Term::constant(name)
}

fn positive(fluents: Vec<Fluent>) -> CNState {
    CNState::positive_only(FluentTerm::from_fluents(fluents))
}

fn stochastic(
    name: &str,
    params: &[&str],
    pre: CNState,
    eff: CNState,
    cfg: &BwConfig,
) -> StochasticAction {
    let params: Vec<String> = params.iter().map(|p| p.to_string()).collect();
    StochasticAction {
        name: name.to_string(),
        params: params.clone(),
        choices: vec![
            NatureChoice {
                name: format!("{name}S"),
                params: params.clone(),
                pre: pre.clone(),
                eff,
                prob: cfg.success_prob,
            },
            NatureChoice {
                name: format!("{name}F"),
                params,
                pre: pre.clone(),
                eff: pre,
                prob: 1.0 - cfg.success_prob,
            },
        ],
        cost: cfg.action_cost,
    }
}

/// Generate a colored Blocksworld domain/problem pair. Deterministic in the
/// configuration: the same (blocks, colors, seed) always yields the same
/// specs. Colors are assigned round-robin and then shuffled by the seeded
/// generator (ChaCha8); the goal tower's colors are read off a seeded
/// permutation of the blocks, so the goal is always satisfiable.
pub fn generate_colored_bw(cfg: &BwConfig) -> Result<(DomainSpec, ProblemSpec)> {
    if cfg.blocks == 0 {
        return Err(Error::validation("need at least one block"));
    }
    if cfg.colors == 0 || cfg.colors > cfg.blocks {
        return Err(Error::validation(format!(
            "colors must satisfy 1 <= colors <= blocks, got {} colors for {} blocks",
            cfg.colors, cfg.blocks
        )));
    }
    if !(0.0 < cfg.success_prob && cfg.success_prob <= 1.0) {
        return Err(Error::validation(format!(
            "success probability {} out of (0, 1]",
            cfg.success_prob
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let blocks: Vec<String> = (1..=cfg.blocks).map(|i| format!("b{i}")).collect();
    let mut colors: Vec<String> = (0..cfg.blocks)
        .map(|i| format!("c{}", i % cfg.colors + 1))
        .collect();
    colors.shuffle(&mut rng);

    // Goal: a tower whose colors, top to bottom, are the colors of the first
    // blocks of a seeded permutation.
    let height = cfg.blocks.min(3);
    let mut perm: Vec<usize> = (0..cfg.blocks).collect();
    perm.shuffle(&mut rng);
    let tower_colors: Vec<&String> = perm[..height].iter().map(|&i| &colors[i]).collect();

    let mut goal = vec![Fluent::nullary("e"), Fluent::new("clear", vec![var("X1")])];
    for i in 0..height {
        let xi = format!("X{}", i + 1);
        goal.push(Fluent::new(
            "col",
            vec![var(&xi), cst(tower_colors[i])],
        ));
        if i + 1 < height {
            goal.push(Fluent::new(
                "on",
                vec![var(&xi), var(&format!("X{}", i + 2))],
            ));
        } else {
            goal.push(Fluent::new("ontable", vec![var(&xi)]));
        }
    }

    let name = format!("bw_b{}_c{}_s{}", cfg.blocks, cfg.colors, cfg.seed);

    let pickup = stochastic(
        "pickup",
        &["X"],
        positive(vec![
            Fluent::nullary("e"),
            Fluent::new("clear", vec![var("X")]),
            Fluent::new("ontable", vec![var("X")]),
        ]),
        positive(vec![Fluent::new("holding", vec![var("X")])]),
        cfg,
    );
    let putdown = stochastic(
        "putdown",
        &["X"],
        positive(vec![Fluent::new("holding", vec![var("X")])]),
        positive(vec![
            Fluent::nullary("e"),
            Fluent::new("clear", vec![var("X")]),
            Fluent::new("ontable", vec![var("X")]),
        ]),
        cfg,
    );
    let stack = stochastic(
        "stack",
        &["X", "Y"],
        positive(vec![
            Fluent::new("holding", vec![var("X")]),
            Fluent::new("clear", vec![var("Y")]),
        ]),
        positive(vec![
            Fluent::nullary("e"),
            Fluent::new("clear", vec![var("X")]),
            Fluent::new("on", vec![var("X"), var("Y")]),
        ]),
        cfg,
    );
    let unstack = stochastic(
        "unstack",
        &["X", "Y"],
        positive(vec![
            Fluent::nullary("e"),
            Fluent::new("clear", vec![var("X")]),
            Fluent::new("on", vec![var("X"), var("Y")]),
        ]),
        positive(vec![
            Fluent::new("holding", vec![var("X")]),
            Fluent::new("clear", vec![var("Y")]),
        ]),
        cfg,
    );

    let dom = DomainSpec {
        name: name.clone(),
        fluents: vec![
            FluentDecl {
                symbol: "on".into(),
                arity: 2,
            },
            FluentDecl {
                symbol: "ontable".into(),
                arity: 1,
            },
            FluentDecl {
                symbol: "clear".into(),
                arity: 1,
            },
            FluentDecl {
                symbol: "holding".into(),
                arity: 1,
            },
            FluentDecl {
                symbol: "e".into(),
                arity: 0,
            },
            FluentDecl {
                symbol: "col".into(),
                arity: 2,
            },
        ],
        actions: vec![pickup, putdown, stack, unstack],
        reward: RewardModel {
            rules: vec![RewardRule {
                condition: CNState::positive_only(FluentTerm::from_fluents(goal)),
                value: cfg.goal_reward,
                absorbing: true,
            }],
            default_value: 0.0,
        },
        gamma: cfg.gamma,
    };
    dom.validate()?;

    // All blocks start on the table with an empty gripper.
    let mut init = vec![Fluent::nullary("e")];
    for (i, b) in blocks.iter().enumerate() {
        init.push(Fluent::new("ontable", vec![cst(b)]));
        init.push(Fluent::new("clear", vec![cst(b)]));
        init.push(Fluent::new("col", vec![cst(b), cst(&colors[i])]));
    }
    let problem = ProblemSpec {
        name,
        domain: dom.name.clone(),
        initial_states: vec![GroundState::from_fluents(init)],
        horizon: cfg.horizon,
    };
    problem.validate(&dom)?;
    Ok((dom, problem))
}

//! `fmdp`: command-line front end for the fluent-mdp solver.
//!
//! Exit codes: 0 success, 1 validation failure, 2 non-convergence, 3 I/O.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use fluent_mdp::blocksworld::{generate_colored_bw, BwConfig};
use fluent_mdp::domain::{DomainSpec, ProblemSpec};
use fluent_mdp::folao::{folao, solve_exhaustive, SolveConfig};
use fluent_mdp::oracle::{
    cross_validate, cross_validate_subset, enumerate_reachable, ground_policy_to_abstract,
    ground_value_iteration, policy_reachable_states,
};
use fluent_mdp::sim::simulate;
use fluent_mdp::syntax::{domain_to_string, parse_domain, parse_problem, problem_to_string};
use fluent_mdp::value::{Policy, ValueFunction};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NON_CONVERGENCE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "fmdp",
    about = "Symbolic solver for first-order MDPs over fluent-calculus abstract states"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a problem with heuristic search (default) or exhaustive value
    /// iteration; writes <prefix>.vals and <prefix>.pol and prints stats.
    Solve {
        domain: PathBuf,
        problem: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        /// Discount override; defaults to the domain's gamma.
        #[arg(long)]
        gamma: Option<f64>,
        /// Regression sweeps for the admissible heuristic.
        #[arg(long, default_value_t = 5)]
        heuristic_sweeps: usize,
        #[arg(long, default_value_t = 100)]
        max_outer: usize,
        #[arg(long, default_value_t = 1000)]
        max_inner: usize,
        /// Expand every reachable abstract state instead of searching.
        #[arg(long)]
        exhaustive: bool,
        /// Output prefix; defaults to the problem path without extension.
        #[arg(long)]
        out_prefix: Option<PathBuf>,
    },
    /// Run Monte-Carlo rollouts of a stored policy.
    Simulate {
        domain: PathBuf,
        problem: PathBuf,
        policy: PathBuf,
        #[arg(long, default_value_t = 30)]
        runs: usize,
        /// Step cap per run; defaults to the problem's horizon.
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare a stored value function against brute-force ground value
    /// iteration.
    OracleCheck {
        domain: PathBuf,
        problem: PathBuf,
        values: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Restrict the comparison to states reachable under this policy.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Also write the oracle's optimal values/policy to
        /// <prefix>.vals/<prefix>.pol for diffing.
        #[arg(long)]
        export_prefix: Option<PathBuf>,
        #[arg(long, default_value_t = 200_000)]
        state_bound: usize,
    },
    /// Generate a colored Blocksworld domain/problem pair.
    GenBw {
        #[arg(long)]
        blocks: usize,
        #[arg(long)]
        colors: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 500.0)]
        reward: f64,
        #[arg(long, default_value_t = -3.0)]
        cost: f64,
        #[arg(long, default_value_t = 0.75)]
        success_prob: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
    },
    /// Pretty-print a value-function file.
    Inspect { values: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<std::io::Error>().is_some() {
        return EXIT_IO;
    }
    EXIT_VALIDATION
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_pair(domain: &Path, problem: &Path) -> anyhow::Result<(DomainSpec, ProblemSpec)> {
    let dom = parse_domain(&read(domain)?)
        .with_context(|| format!("loading domain {}", domain.display()))?;
    let prob = parse_problem(&read(problem)?, &dom)
        .with_context(|| format!("loading problem {}", problem.display()))?;
    Ok((dom, prob))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.cmd {
        Cmd::Solve {
            domain,
            problem,
            epsilon,
            gamma,
            heuristic_sweeps,
            max_outer,
            max_inner,
            exhaustive,
            out_prefix,
        } => {
            let (dom, prob) = load_pair(&domain, &problem)?;
            let cfg = SolveConfig {
                epsilon,
                gamma,
                heuristic_sweeps,
                max_outer_iters: max_outer,
                max_inner_iters: max_inner,
            };
            let result = if exhaustive {
                solve_exhaustive(&dom, &prob.initial_states, &cfg)?
            } else {
                folao(&dom, &prob.initial_states, &cfg)?
            };
            let prefix = out_prefix.unwrap_or_else(|| problem.with_extension(""));
            let vals_path = prefix.with_extension("vals");
            let pol_path = prefix.with_extension("pol");
            write(&vals_path, &result.values.to_text())?;
            write(&pol_path, &result.policy.to_text())?;
            print!("{}", result.stats);
            println!("values_file={}", vals_path.display());
            println!("policy_file={}", pol_path.display());
            if result.stats.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("warning: solver did not converge; artifacts are partial");
                Ok(ExitCode::from(EXIT_NON_CONVERGENCE))
            }
        }
        Cmd::Simulate {
            domain,
            problem,
            policy,
            runs,
            cap,
            seed,
        } => {
            let (dom, prob) = load_pair(&domain, &problem)?;
            let policy = Policy::from_text(&read(&policy)?)
                .with_context(|| format!("loading policy {}", policy.display()))?;
            let cap = cap.unwrap_or(prob.horizon);
            let summary = simulate(&policy, &prob, &dom, runs, cap, seed)?;
            print!("{summary}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::OracleCheck {
            domain,
            problem,
            values,
            tol,
            policy,
            export_prefix,
            state_bound,
        } => {
            let (dom, prob) = load_pair(&domain, &problem)?;
            let v = ValueFunction::from_text(&read(&values)?)
                .with_context(|| format!("loading values {}", values.display()))?;
            let m = enumerate_reachable(&dom, &prob.initial_states, &prob.universe(), state_bound)?;
            let solution = ground_value_iteration(&m, (tol / 10.0).min(1e-6))?;
            if let Some(prefix) = export_prefix {
                let mut oracle_values = ValueFunction::new(dom.reward.default_value);
                for (s, d) in m.states.iter().enumerate() {
                    oracle_values
                        .set(fluent_mdp::CNState::lift(d).canonical(), solution.values[s]);
                }
                let oracle_policy = ground_policy_to_abstract(&dom, &m, &solution);
                write(&prefix.with_extension("vals"), &oracle_values.to_text())?;
                write(&prefix.with_extension("pol"), &oracle_policy.to_text())?;
            }
            let report = match policy {
                Some(path) => {
                    let pol = Policy::from_text(&read(&path)?)
                        .with_context(|| format!("loading policy {}", path.display()))?;
                    let covered =
                        policy_reachable_states(&dom, &m, &pol, &prob.initial_states);
                    cross_validate_subset(&v, &m, &solution.values, tol, covered)
                }
                None => cross_validate(&v, &m, &solution.values, tol),
            };
            print!("{report}");
            if report.within_tolerance() {
                Ok(ExitCode::SUCCESS)
            } else {
                Err(anyhow!(
                    "abstract values deviate from ground optimum by {:.3e} (> {tol:e})",
                    report.max_abs_deviation
                ))
            }
        }
        Cmd::GenBw {
            blocks,
            colors,
            seed,
            out_dir,
            reward,
            cost,
            success_prob,
            gamma,
            horizon,
        } => {
            let cfg = BwConfig {
                blocks,
                colors,
                seed,
                goal_reward: reward,
                action_cost: cost,
                success_prob,
                gamma,
                horizon,
            };
            let (dom, prob) = generate_colored_bw(&cfg)?;
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            let domain_path = out_dir.join(format!("{}.fcd", dom.name));
            let problem_path = out_dir.join(format!("{}.fcp", prob.name));
            write(&domain_path, &domain_to_string(&dom))?;
            write(&problem_path, &problem_to_string(&prob))?;
            println!("domain_file={}", domain_path.display());
            println!("problem_file={}", problem_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Inspect { values } => {
            let v = ValueFunction::from_text(&read(&values)?)
                .with_context(|| format!("loading values {}", values.display()))?;
            println!("entries={}", v.len());
            println!("default={}", v.default_value);
            for (z, value) in v.iter() {
                println!("{value:>12.4}  {z}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

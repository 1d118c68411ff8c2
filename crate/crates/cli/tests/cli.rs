//! End-to-end runs of the `fmdp` binary: generate, solve, simulate,
//! oracle-check, inspect, and the error exits.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fmdp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmdp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn fmdp")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fmdp-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn full_pipeline_on_small_instance() {
    let dir = workdir("pipeline");

    let gen = fmdp(
        &["gen-bw", "--blocks", "2", "--colors", "2", "--seed", "0"],
        &dir,
    );
    assert!(gen.status.success(), "{gen:?}");
    let domain = dir.join("bw_b2_c2_s0.fcd");
    let problem = dir.join("bw_b2_c2_s0.fcp");
    assert!(domain.exists() && problem.exists());

    // Deterministic regeneration produces byte-identical files.
    let first = std::fs::read(&domain).unwrap();
    fmdp(
        &["gen-bw", "--blocks", "2", "--colors", "2", "--seed", "0"],
        &dir,
    );
    assert_eq!(first, std::fs::read(&domain).unwrap());

    let solve = fmdp(
        &[
            "solve",
            "bw_b2_c2_s0.fcd",
            "bw_b2_c2_s0.fcp",
            "--epsilon",
            "1e-4",
            "--exhaustive",
        ],
        &dir,
    );
    assert!(solve.status.success(), "{solve:?}");
    let stats = stdout(&solve);
    assert!(stats.contains("converged=true"), "{stats}");
    assert!(stats.contains("abstract_states="), "{stats}");
    assert!(stats.contains("wall_ms="), "{stats}");
    let vals = dir.join("bw_b2_c2_s0.vals");
    let pol = dir.join("bw_b2_c2_s0.pol");
    assert!(vals.exists() && pol.exists());

    // Exhaustive values match the ground oracle at every reachable state.
    let check = fmdp(
        &[
            "oracle-check",
            "bw_b2_c2_s0.fcd",
            "bw_b2_c2_s0.fcp",
            "bw_b2_c2_s0.vals",
        ],
        &dir,
    );
    assert!(check.status.success(), "{check:?}");
    assert!(stdout(&check).contains("offenders=0"));

    let sim = fmdp(
        &[
            "simulate",
            "bw_b2_c2_s0.fcd",
            "bw_b2_c2_s0.fcp",
            "bw_b2_c2_s0.pol",
            "--runs",
            "30",
            "--seed",
            "7",
        ],
        &dir,
    );
    assert!(sim.status.success(), "{sim:?}");
    let summary = stdout(&sim);
    assert!(summary.contains("runs=30"), "{summary}");
    assert!(summary.contains("rng=chacha8"), "{summary}");

    let inspect = fmdp(&["inspect", "bw_b2_c2_s0.vals"], &dir);
    assert!(inspect.status.success());
    assert!(stdout(&inspect).contains("entries="));
}

#[test]
fn focused_solver_passes_policy_restricted_check() {
    let dir = workdir("focused");
    fmdp(
        &["gen-bw", "--blocks", "3", "--colors", "2", "--seed", "0"],
        &dir,
    );
    let solve = fmdp(&["solve", "bw_b3_c2_s0.fcd", "bw_b3_c2_s0.fcp"], &dir);
    assert!(solve.status.success(), "{solve:?}");
    let check = fmdp(
        &[
            "oracle-check",
            "bw_b3_c2_s0.fcd",
            "bw_b3_c2_s0.fcp",
            "bw_b3_c2_s0.vals",
            "--policy",
            "bw_b3_c2_s0.pol",
        ],
        &dir,
    );
    assert!(check.status.success(), "{check:?}");
}

#[test]
fn validation_errors_exit_one() {
    let dir = workdir("validation");
    let bad = dir.join("bad.fcd");
    std::fs::write(&bad, "domain broken\ngamma oops\n").unwrap();
    let good_problem = dir.join("p.fcp");
    std::fs::write(&good_problem, "problem p\ndomain broken\ninit: e\n").unwrap();
    let out = fmdp(&["solve", "bad.fcd", "p.fcp"], &dir);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));

    let out = fmdp(
        &["gen-bw", "--blocks", "2", "--colors", "5"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(1), "{out:?}");
}

#[test]
fn missing_files_exit_three() {
    let dir = workdir("io");
    let out = fmdp(&["solve", "nope.fcd", "nope.fcp"], &dir);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

//! Shared test helpers: the big-step reference oracle, random program
//! generation, and the agreement check between the two.

#![allow(dead_code)]

pub mod gen;
pub mod oracle;

use stepdbg::stepper::{self, Env, EvalOptions, Outcome};
use stepdbg::syntax::{parse_program, Expr};

/// Runs deep-recursion work on a thread with a generous stack; the
/// engine recurses over expression spines (the tree corpus holds a
/// hundred-element list).
pub fn with_big_stack<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new()
        .stack_size(256 * 1024 * 1024)
        .spawn(f)
        .unwrap()
        .join()
        .unwrap()
}

pub fn corpus_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("programs")
}

pub fn load_corpus(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap()
}

pub const CORPUS: &[&str] = &[
    "donothing.mml",
    "factorial.mml",
    "factorialacc.mml",
    "helloworld.mml",
    "reference_swap.mml",
    "exception.mml",
    "table.mml",
    "tree.mml",
];

/// Runs an expression through the single-step engine and the big-step
/// oracle, checking that the final outcomes and printed output agree.
/// Returns a description of the stepper's outcome.
pub fn assert_engines_agree(e: &Expr, what: &str) -> String {
    let env = Env::with_prelude();
    let mut resolved = e.clone();
    stepper::resolve_operators(&mut resolved, env.builtins());
    let mut sink = Vec::new();
    let mut observer = |_: &Expr, _: &stepper::LastOp, _: &Expr| {};
    let opts = EvalOptions {
        max_steps: Some(200_000),
        ..Default::default()
    };
    let stepped = stepper::run(&env, &resolved, &mut observer, &opts, &mut sink)
        .unwrap_or_else(|err| panic!("stepper failed on {what}: {err}\n{e:?}"));

    let (oracle_outcome, oracle_out) = oracle::run_program(e);

    match (&stepped.outcome, &oracle_outcome) {
        (Outcome::Value(v), oracle::OracleOutcome::Value(ov)) => {
            assert!(
                oracle::values_agree(v, ov),
                "{what}: stepper value {v:?} != oracle value {ov:?}"
            );
        }
        (Outcome::Uncaught(n1, p1), oracle::OracleOutcome::Uncaught(n2, p2)) => {
            assert_eq!(n1, n2, "{what}: exception names differ");
            let payloads_agree = match (p1, p2) {
                (None, None) => true,
                (Some(a), Some(b)) => oracle::values_agree(a, b),
                _ => false,
            };
            assert!(payloads_agree, "{what}: exception payloads differ");
        }
        (a, b) => panic!("{what}: stepper {a:?} vs oracle {b:?}"),
    }
    assert_eq!(
        String::from_utf8_lossy(&sink),
        String::from_utf8_lossy(&oracle_out),
        "{what}: printed output differs"
    );
    format!("{:?}", stepped.outcome)
}

pub fn parse_to_expr(text: &str) -> Expr {
    parse_program(text).unwrap().to_expr()
}

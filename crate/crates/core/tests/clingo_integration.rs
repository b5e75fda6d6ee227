//! Integration tests against a real clingo process.

mod common;

use asp_forge_core::atoms::parse_answer_set;
use asp_forge_core::domain::{AspProgram, SolverOutcome};
use asp_forge_core::solver::{format_feedback, ClingoSolver, Solver, SolverLimits};

fn solver() -> ClingoSolver {
    ClingoSolver::new(common::clingo_path())
}

fn limits(time_limit_s: f64, max_models: u32) -> SolverLimits {
    SolverLimits {
        time_limit_s,
        max_models,
    }
}

const ZEBRA_PASS1: &str = include_str!("fixtures/zebra_pass1.lp");
const ZEBRA_PASS2: &str = include_str!("fixtures/zebra_pass2.lp");
const ZEBRA_ANSWER_SET: &str = include_str!("fixtures/zebra_answer_set.txt");

#[test]
fn valid_single_model_program_is_sat() {
    let outcome = solver()
        .run(&AspProgram::new("a. b :- a."), &limits(10.0, 1))
        .unwrap();
    match outcome {
        SolverOutcome::Sat { answer_sets, .. } => {
            assert_eq!(answer_sets.len(), 1);
            assert_eq!(answer_sets[0], parse_answer_set("a b").unwrap());
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn direct_contradiction_is_unsat() {
    let outcome = solver()
        .run(&AspProgram::new("a. :- a."), &limits(10.0, 1))
        .unwrap();
    assert!(matches!(outcome, SolverOutcome::Unsat { .. }));
}

#[test]
fn malformed_rule_is_syntax_error() {
    // A rule missing its terminating period fails to parse.
    let outcome = solver()
        .run(&AspProgram::new("house(1..6)\nfoo(."), &limits(10.0, 1))
        .unwrap();
    match outcome {
        SolverOutcome::SyntaxError { stderr } => {
            assert!(stderr.contains("error:"), "stderr: {stderr}");
            assert!(stderr.contains("syntax error"), "stderr: {stderr}");
            // The temp path is redacted so feedback and replays are stable.
            assert!(stderr.contains("program.lp:"), "stderr: {stderr}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn empty_body_rule_is_accepted_by_clingo_5() {
    // `a :- .` parses as the fact `a.` in clingo 5.8; it is not a syntax
    // error, so it must classify as Sat.
    let outcome = solver()
        .run(&AspProgram::new("a :- ."), &limits(10.0, 1))
        .unwrap();
    assert!(matches!(outcome, SolverOutcome::Sat { .. }));
}

#[test]
fn slow_program_is_killed_as_timeout() {
    let pigeonhole = "pigeon(1..12). hole(1..11).\n\
                      { at(P,H) : hole(H) } = 1 :- pigeon(P).\n\
                      :- at(P1,H), at(P2,H), P1 < P2.";
    let started = std::time::Instant::now();
    let outcome = solver()
        .run(&AspProgram::new(pigeonhole), &limits(1.0, 1))
        .unwrap();
    let elapsed = started.elapsed();
    match outcome {
        SolverOutcome::Timeout { limit_s } => assert_eq!(limit_s, 1.0),
        other => panic!("unexpected {other:?}"),
    }
    assert!(
        elapsed.as_secs_f64() < 2.0,
        "kill must land within limit + 1s, took {elapsed:?}"
    );
}

#[test]
fn unsafe_variable_is_a_grounding_error() {
    let outcome = solver()
        .run(&AspProgram::new("p(X) :- not q(X)."), &limits(10.0, 1))
        .unwrap();
    assert!(matches!(outcome, SolverOutcome::SyntaxError { .. }));
}

#[test]
fn zebra_pass2_yields_the_printed_answer_set() {
    let outcome = solver()
        .run(&AspProgram::new(ZEBRA_PASS2), &limits(30.0, 1))
        .unwrap();
    match outcome {
        SolverOutcome::Sat { answer_sets, .. } => {
            let expected = parse_answer_set(ZEBRA_ANSWER_SET.trim()).unwrap();
            assert_eq!(expected.len(), 36);
            assert_eq!(answer_sets[0], expected);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn zebra_pass1_admits_multiple_models() {
    let outcome = solver()
        .run(&AspProgram::new(ZEBRA_PASS1), &limits(30.0, 2))
        .unwrap();
    match outcome {
        SolverOutcome::Sat { answer_sets, .. } => assert_eq!(answer_sets.len(), 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn incremental_blocksworld_runs_unmodified() {
    let program = "#include <incmode>.\n\
        #program base.\n\
        block(b0). block(b1). block(b2).\n\
        init(on(b1,table)). init(on(b2,b0)). init(on(b0,table)).\n\
        goal(on(b1,b0)). goal(on(b2,b1)). goal(on(b0,table)).\n\
        location(table).\n\
        location(X) :- block(X).\n\
        holds(F,0) :- init(F).\n\
        #program step(t).\n\
        { move(X,Y,t) : block(X), location(Y), X != Y } = 1.\n\
        :- move(X,Y,t), holds(on(A,X),t-1).\n\
        :- move(X,Y,t), holds(on(B,Y),t-1), B != X, Y != table.\n\
        moved(X,t) :- move(X,Y,t).\n\
        holds(on(X,Y),t) :- move(X,Y,t).\n\
        holds(on(X,Z),t) :- holds(on(X,Z),t-1), not moved(X,t).\n\
        #program check(t).\n\
        :- query(t), goal(F), not holds(F,t).\n\
        #show move/3.\n";
    let outcome = solver()
        .run(&AspProgram::new(program), &limits(30.0, 1))
        .unwrap();
    match outcome {
        SolverOutcome::Sat { answer_sets, .. } => {
            let expected =
                parse_answer_set("move(b2,table,1) move(b1,b0,2) move(b2,b1,3)").unwrap();
            assert_eq!(answer_sets[0], expected);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn sat_feedback_embeds_the_model_line() {
    let outcome = solver()
        .run(&AspProgram::new(ZEBRA_PASS2), &limits(30.0, 1))
        .unwrap();
    let feedback = format_feedback(&outcome);
    assert!(feedback.contains("SATISFIABLE"));
    assert!(feedback.contains("wears(4,jeans)"));
    assert!(feedback.contains("Answer Set 1: "));
    assert!(feedback.starts_with("Here is the candidate answer set"));
}

#[test]
fn determinism_same_program_same_outcome() {
    let s = solver();
    let a = s.run(&AspProgram::new(ZEBRA_PASS2), &limits(30.0, 1)).unwrap();
    let b = s.run(&AspProgram::new(ZEBRA_PASS2), &limits(30.0, 1)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn keep_dir_retains_program_files() {
    let dir = tempfile::tempdir().unwrap();
    let s = ClingoSolver::new(common::clingo_path()).with_keep_dir(Some(dir.path().to_path_buf()));
    s.run(&AspProgram::new("a."), &limits(10.0, 1)).unwrap();
    let kept: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().map(|x| x == "lp").unwrap_or(false))
        .collect();
    assert_eq!(kept.len(), 1);
}

//! Property suites: atom round-trips, transcript accounting, prompt
//! embedding, metric recomputation.

use std::collections::BTreeMap;

use proptest::prelude::*;

use asp_forge_core::atoms::{parse_answer_set, parse_atom, Atom, AtomSet, Term};
use asp_forge_core::domain::{
    revision_count_from_updates, AspProgram, GeneratorAction, GroundTruth, IterationRecord,
    Problem, ReferenceDoc, ReferenceKind, TaskKind, TokenUsage, WallTimes,
};
use asp_forge_core::eval::{compute_metrics, Verdict};
use asp_forge_core::prompting::{build_generator_prompt, PromptContext};

fn name_strategy() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,8}"
}

fn term_strategy() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        name_strategy().prop_map(Term::Symbol),
        any::<i32>().prop_map(|n| Term::Integer(n as i64)),
        "[ -~]{0,10}".prop_map(Term::QuotedString),
    ];
    // Three levels of recursion on top of leaves: nesting depth <= 4.
    leaf.prop_recursive(3, 32, 4, |inner| {
        (name_strategy(), prop::collection::vec(inner, 1..4))
            .prop_map(|(name, args)| Term::Function(name, args))
    })
}

fn atom_strategy() -> impl Strategy<Value = Atom> {
    (name_strategy(), prop::collection::vec(term_strategy(), 0..4))
        .prop_map(|(predicate, args)| Atom::new(predicate, args))
}

proptest! {
    #[test]
    fn atom_print_parse_round_trip(atom in atom_strategy()) {
        let printed = atom.to_string();
        let reparsed = parse_atom(&printed).unwrap();
        prop_assert_eq!(reparsed, atom);
    }

    #[test]
    fn answer_set_line_round_trip(atoms in prop::collection::vec(atom_strategy(), 0..8)) {
        let set = AtomSet::new(atoms);
        let line = set.to_string();
        let reparsed = parse_answer_set(&line).unwrap();
        prop_assert_eq!(reparsed, set);
    }

    #[test]
    fn transcript_revision_accounting(actions in prop::collection::vec(any::<bool>(), 0..16)) {
        let iterations: Vec<IterationRecord> = actions
            .iter()
            .map(|is_update| IterationRecord {
                prompt_text: String::new(),
                raw_response: String::new(),
                parsed_action: Some(if *is_update {
                    GeneratorAction::Update { program: AspProgram::new("a.") }
                } else {
                    GeneratorAction::Pass
                }),
                solver_outcome: None,
                wall_times: WallTimes::default(),
                token_usage: TokenUsage::default(),
            })
            .collect();
        let updates = iterations
            .iter()
            .filter(|it| matches!(it.parsed_action, Some(GeneratorAction::Update { .. })))
            .count();
        let expected = updates.saturating_sub(1) as u32;
        prop_assert_eq!(revision_count_from_updates(updates), expected);
    }

    #[test]
    fn metrics_recomputation_is_pure_and_partitions(
        flags in prop::collection::vec((any::<bool>(), any::<bool>(), 0u32..12), 1..40)
    ) {
        let verdicts: Vec<Verdict> = flags
            .iter()
            .enumerate()
            .map(|(i, (passed, correct_if_passed, revisions))| {
                let correct = *passed && *correct_if_passed;
                Verdict {
                    problem_id: format!("p{i}"),
                    benchmark: if i % 2 == 0 { "even".into() } else { "odd".into() },
                    correct,
                    passed: *passed,
                    revision_count: *revisions,
                    error_category: if correct {
                        None
                    } else {
                        Some(asp_forge_core::domain::ErrorCategory::SatIncorrect)
                    },
                    details: String::new(),
                }
            })
            .collect();
        let a = compute_metrics(&verdicts);
        let b = compute_metrics(&verdicts);
        prop_assert_eq!(&a, &b);
        let errors: usize = a.overall.error_counts.values().sum();
        prop_assert_eq!(a.overall.correct + errors, a.overall.total);
        prop_assert!(a.overall.pass_incorrect <= a.overall.pass_denominator);
        prop_assert!((0.0..=1.0).contains(&a.overall.accuracy));
    }
}

fn marked_problem(text: String) -> Problem {
    Problem {
        id: "prop".into(),
        benchmark: "prop".into(),
        text,
        task_kind: TaskKind::Label,
        ground_truth: GroundTruth::Label {
            label: "yes".into(),
            label_set: vec!["yes".into(), "no".into()],
        },
        metadata: BTreeMap::new(),
    }
}

proptest! {
    // Distinctive markers avoid accidental overlap with template text.
    #[test]
    fn generator_prompt_embeds_each_input_exactly_once(
        p in "zzqproblem[a-z0-9]{4,20}",
        prog in "zzqprogram[a-z0-9]{4,20}",
        fb in "zzqfeedback[a-z0-9]{4,20}",
        r in "zzqref[a-z0-9]{4,20}",
    ) {
        let problem = marked_problem(p.clone());
        let reference = ReferenceDoc { kind: ReferenceKind::Compact, body: r.clone() };
        let program = AspProgram::new(prog.clone());
        let prompt = build_generator_prompt(&PromptContext::followup(
            &problem, &reference, &program, &fb,
        ));
        prop_assert_eq!(prompt.matches(&p).count(), 1);
        prop_assert_eq!(prompt.matches(&prog).count(), 1);
        prop_assert_eq!(prompt.matches(&fb).count(), 1);
        prop_assert_eq!(prompt.matches(&r).count(), 1);

        let again = build_generator_prompt(&PromptContext::followup(
            &problem, &reference, &program, &fb,
        ));
        prop_assert_eq!(prompt, again);
    }
}

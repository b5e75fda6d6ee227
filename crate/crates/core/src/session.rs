//! The revision state machine: generator → solver → feedback cycles until
//! PASS or budget exhaustion, then one formatter call; everything recorded.
//!
//! The first pass must produce a program (the prompt offers no PASS option),
//! so a first-pass PASS is a protocol violation. Budget accounting: the
//! initial program is an update but not a revision; once `max_revisions`
//! revisions have been solved the session stops as BudgetExhausted, keeping
//! the last program and outcome for grading. Gateway and protocol failures
//! terminate the session with the corresponding status; they never panic the
//! surrounding batch.

use std::time::Instant;

use crate::domain::{
    revision_count_from_updates, AspProgram, FinalAnswer, FormatterRecord, GeneratorAction,
    IterationRecord, Problem, ReferenceDoc, RunConfig, SessionStatus, SessionTranscript,
    SolverOutcome, TokenUsage, WallTimes,
};
use crate::gateway::{LlmBackend, LlmRequest};
use crate::prompting::{answer_instruction, build_formatter_prompt, build_generator_prompt, PromptContext};
use crate::protocol::{parse_formatter_output, parse_generator_action};
use crate::solver::{format_feedback, render_solver_stdout, Solver, SolverLimits};

/// Everything a session needs besides the problem itself.
pub struct SessionRunner<'a> {
    pub config: &'a RunConfig,
    pub reference: &'a ReferenceDoc,
    pub gateway: &'a dyn LlmBackend,
    pub solver: &'a dyn Solver,
}

struct Exchange {
    prompt: String,
    response: String,
    usage: TokenUsage,
    wall_ms: u64,
}

impl SessionRunner<'_> {
    fn limits(&self) -> SolverLimits {
        SolverLimits {
            time_limit_s: self.config.solver_time_limit_s,
            max_models: self.config.max_models,
        }
    }

    fn complete(&self, prompt: String) -> Result<Exchange, String> {
        let request = LlmRequest {
            model_id: self.config.model_id.clone(),
            prompt,
            temperature: self.config.temperature,
            max_output_tokens: None,
        };
        let started = Instant::now();
        match self.gateway.complete(&request) {
            Ok(response) => Ok(Exchange {
                prompt: request.prompt,
                response: response.text,
                usage: response.token_usage,
                wall_ms: started.elapsed().as_millis() as u64,
            }),
            Err(e) => Err(e.to_string()),
        }
    }

    /// Drive one problem through the full loop.
    pub fn run(&self, problem: &Problem) -> SessionTranscript {
        let mut transcript = SessionTranscript {
            problem_id: problem.id.clone(),
            problem: problem.clone(),
            config: self.config.clone(),
            iterations: Vec::new(),
            formatter: None,
            final_status: SessionStatus::BudgetExhausted,
            final_answer: None,
            revision_count: 0,
        };

        let finish = |mut t: SessionTranscript, status: SessionStatus| {
            t.revision_count = revision_count_from_updates(t.update_count());
            t.final_status = status;
            t
        };

        // First pass: the only option is writing the initial program.
        let prompt = build_generator_prompt(&PromptContext::first_pass(problem, self.reference));
        let exchange = match self.complete(prompt) {
            Ok(e) => e,
            Err(reason) => {
                return finish(
                    transcript,
                    SessionStatus::BackendFailure(format!("generator call 1: {reason}")),
                );
            }
        };
        let action = parse_generator_action(&exchange.response);
        let mut record = IterationRecord {
            prompt_text: exchange.prompt,
            raw_response: exchange.response,
            parsed_action: action.as_ref().ok().cloned(),
            solver_outcome: None,
            wall_times: WallTimes {
                generator_ms: exchange.wall_ms,
                solver_ms: 0,
            },
            token_usage: exchange.usage,
        };
        let mut program = match action {
            Err(e) => {
                transcript.iterations.push(record);
                return finish(transcript, SessionStatus::ProtocolViolation(e.to_string()));
            }
            Ok(GeneratorAction::Pass) => {
                transcript.iterations.push(record);
                return finish(
                    transcript,
                    SessionStatus::ProtocolViolation(
                        "PASS on the first pass: no program exists yet".into(),
                    ),
                );
            }
            Ok(GeneratorAction::Update { program }) => program,
        };

        let mut outcome = match self.solve_into(&program, &mut record) {
            Ok(o) => o,
            Err(reason) => {
                transcript.iterations.push(record);
                return finish(transcript, SessionStatus::BackendFailure(reason));
            }
        };
        transcript.iterations.push(record);
        let mut revisions_done: u32 = 0;

        loop {
            if revisions_done >= self.config.max_revisions {
                return finish(transcript, SessionStatus::BudgetExhausted);
            }

            let feedback = format_feedback(&outcome);
            let prompt = build_generator_prompt(&PromptContext::followup(
                problem,
                self.reference,
                &program,
                &feedback,
            ));
            let exchange = match self.complete(prompt) {
                Ok(e) => e,
                Err(reason) => {
                    let call = transcript.iterations.len() + 1;
                    return finish(
                        transcript,
                        SessionStatus::BackendFailure(format!("generator call {call}: {reason}")),
                    );
                }
            };
            let action = parse_generator_action(&exchange.response);
            let mut record = IterationRecord {
                prompt_text: exchange.prompt,
                raw_response: exchange.response,
                parsed_action: action.as_ref().ok().cloned(),
                solver_outcome: None,
                wall_times: WallTimes {
                    generator_ms: exchange.wall_ms,
                    solver_ms: 0,
                },
                token_usage: exchange.usage,
            };
            match action {
                Err(e) => {
                    transcript.iterations.push(record);
                    return finish(transcript, SessionStatus::ProtocolViolation(e.to_string()));
                }
                Ok(GeneratorAction::Pass) => {
                    transcript.iterations.push(record);
                    return self.run_formatter_stage(problem, &outcome, transcript, finish);
                }
                Ok(GeneratorAction::Update { program: next }) => {
                    program = next;
                    outcome = match self.solve_into(&program, &mut record) {
                        Ok(o) => o,
                        Err(reason) => {
                            transcript.iterations.push(record);
                            return finish(transcript, SessionStatus::BackendFailure(reason));
                        }
                    };
                    transcript.iterations.push(record);
                    revisions_done += 1;
                }
            }
        }
    }

    fn solve_into(
        &self,
        program: &AspProgram,
        record: &mut IterationRecord,
    ) -> Result<SolverOutcome, String> {
        let started = Instant::now();
        let result = self.solver.run(program, &self.limits());
        record.wall_times.solver_ms = started.elapsed().as_millis() as u64;
        match result {
            Ok(outcome) => {
                record.solver_outcome = Some(outcome.clone());
                Ok(outcome)
            }
            Err(e) => Err(format!("solver: {e}")),
        }
    }

    fn run_formatter_stage(
        &self,
        problem: &Problem,
        last_outcome: &SolverOutcome,
        mut transcript: SessionTranscript,
        finish: impl Fn(SessionTranscript, SessionStatus) -> SessionTranscript,
    ) -> SessionTranscript {
        let instruction = answer_instruction(problem);
        let solver_output = format!("stdout:\n{}", render_solver_stdout(last_outcome));
        let prompt = build_formatter_prompt(problem, &solver_output, &instruction);
        let exchange = match self.complete(prompt) {
            Ok(e) => e,
            Err(reason) => {
                return finish(
                    transcript,
                    SessionStatus::BackendFailure(format!("formatter call: {reason}")),
                );
            }
        };
        transcript.formatter = Some(FormatterRecord {
            prompt_text: exchange.prompt,
            raw_response: exchange.response.clone(),
            wall_ms: exchange.wall_ms,
            token_usage: exchange.usage,
        });
        match parse_formatter_output(&exchange.response) {
            Ok(answer) => {
                transcript.final_answer = Some(answer);
                finish(transcript, SessionStatus::Passed)
            }
            Err(e) => finish(
                transcript,
                SessionStatus::ProtocolViolation(format!("formatter: {e}")),
            ),
        }
    }
}

/// Zero every wall-time field. Replay equality checks compare transcripts
/// with timings scrubbed; everything else must be exact.
pub fn scrub_wall_times(transcript: &mut SessionTranscript) {
    for it in &mut transcript.iterations {
        it.wall_times = WallTimes::default();
    }
    if let Some(f) = &mut transcript.formatter {
        f.wall_ms = 0;
    }
}

/// Run the formatter against an already-recorded outcome.
///
/// Exposed for single-shot use; `SessionRunner::run` calls the same path.
pub fn run_formatter(
    problem: &Problem,
    last_outcome: &SolverOutcome,
    gateway: &dyn LlmBackend,
    config: &RunConfig,
) -> Result<FinalAnswer, String> {
    let instruction = answer_instruction(problem);
    let solver_output = format!("stdout:\n{}", render_solver_stdout(last_outcome));
    let prompt = build_formatter_prompt(problem, &solver_output, &instruction);
    let response = gateway
        .complete(&LlmRequest {
            model_id: config.model_id.clone(),
            prompt,
            temperature: config.temperature,
            max_output_tokens: None,
        })
        .map_err(|e| e.to_string())?;
    parse_formatter_output(&response.text).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::sync::Mutex;

    use super::*;
    use crate::domain::{GroundTruth, ReferenceKind, TaskKind};
    use crate::gateway::ScriptedBackend;
    use crate::solver::SolverError;

    fn problem() -> Problem {
        Problem {
            id: "p1".into(),
            benchmark: "test".into(),
            text: "toy problem".into(),
            task_kind: TaskKind::Label,
            ground_truth: GroundTruth::Label {
                label: "yes".into(),
                label_set: vec!["yes".into(), "no".into()],
            },
            metadata: BTreeMap::new(),
        }
    }

    fn config(max_revisions: u32) -> RunConfig {
        RunConfig {
            max_revisions,
            model_id: "scripted".into(),
            reference: ReferenceKind::None,
            ..RunConfig::default()
        }
    }

    /// Scripted solver: outcome chosen by a marker in the program source.
    struct FakeSolver {
        calls: Mutex<u32>,
    }

    impl FakeSolver {
        fn new() -> Self {
            FakeSolver {
                calls: Mutex::new(0),
            }
        }

        fn call_count(&self) -> u32 {
            *self.calls.lock().unwrap()
        }
    }

    impl Solver for FakeSolver {
        fn run(&self, program: &AspProgram, limits: &SolverLimits) -> Result<SolverOutcome, SolverError> {
            *self.calls.lock().unwrap() += 1;
            let src = program.source.as_str();
            if src.contains("broken") {
                Ok(SolverOutcome::SyntaxError {
                    stderr: "program.lp:1:1: error: syntax error\n".into(),
                })
            } else if src.contains("nomodel") {
                Ok(SolverOutcome::Unsat {
                    raw_stdout: "UNSATISFIABLE\n".into(),
                })
            } else if src.contains("slow") {
                Ok(SolverOutcome::Timeout {
                    limit_s: limits.time_limit_s,
                })
            } else {
                Ok(SolverOutcome::Sat {
                    answer_sets: vec![crate::atoms::parse_answer_set("answer(yes)").unwrap()],
                    raw_stdout: "Answer: 1\nanswer(yes)\nSATISFIABLE\n\nModels       : 1+\n".into(),
                    raw_stderr: String::new(),
                })
            }
        }
    }

    fn fenced(body: &str) -> String {
        format!("```\n{body}\n```")
    }

    #[test]
    fn minimal_happy_path() {
        let p = problem();
        let cfg = config(10);
        let gateway = ScriptedBackend::new([
            fenced("good(1)."),
            fenced("OPERATION: PASS"),
            fenced("yes"),
        ]);
        let solver = FakeSolver::new();
        let reference = ReferenceDoc::none();
        let runner = SessionRunner {
            config: &cfg,
            reference: &reference,
            gateway: &gateway,
            solver: &solver,
        };
        let t = runner.run(&p);
        assert_eq!(t.final_status, SessionStatus::Passed);
        assert_eq!(t.revision_count, 0);
        assert_eq!(solver.call_count(), 1);
        assert_eq!(t.final_answer, Some(FinalAnswer::Text("yes".into())));
        assert_eq!(t.iterations.len(), 2);
        assert!(t.formatter.is_some());
    }

    #[test]
    fn first_pass_pass_is_a_protocol_violation() {
        let p = problem();
        let cfg = config(10);
        let gateway = ScriptedBackend::new([fenced("OPERATION: PASS")]);
        let solver = FakeSolver::new();
        let reference = ReferenceDoc::none();
        let runner = SessionRunner {
            config: &cfg,
            reference: &reference,
            gateway: &gateway,
            solver: &solver,
        };
        let t = runner.run(&p);
        assert!(matches!(t.final_status, SessionStatus::ProtocolViolation(_)));
        assert_eq!(solver.call_count(), 0);
        assert_eq!(t.revision_count, 0);
    }

    #[test]
    fn always_broken_generator_exhausts_budget() {
        let p = problem();
        let cfg = config(3);
        let responses: Vec<String> = (0..20).map(|i| fenced(&format!("broken({i})."))).collect();
        let gateway = ScriptedBackend::new(responses);
        let solver = FakeSolver::new();
        let reference = ReferenceDoc::none();
        let runner = SessionRunner {
            config: &cfg,
            reference: &reference,
            gateway: &gateway,
            solver: &solver,
        };
        let t = runner.run(&p);
        assert_eq!(t.final_status, SessionStatus::BudgetExhausted);
        assert_eq!(t.revision_count, 3);
        assert_eq!(solver.call_count(), 4); // max_revisions + 1
        assert!(matches!(
            t.last_outcome(),
            Some(SolverOutcome::SyntaxError { .. })
        ));
    }

    #[test]
    fn zero_revision_budget_stops_after_initial_solve() {
        let p = problem();
        let cfg = config(0);
        let gateway = ScriptedBackend::new([fenced("broken(0)."), fenced("broken(1).")]);
        let solver = FakeSolver::new();
        let reference = ReferenceDoc::none();
        let runner = SessionRunner {
            config: &cfg,
            reference: &reference,
            gateway: &gateway,
            solver: &solver,
        };
        let t = runner.run(&p);
        assert_eq!(t.final_status, SessionStatus::BudgetExhausted);
        assert_eq!(solver.call_count(), 1);
        assert_eq!(t.iterations.len(), 1);
        assert_eq!(t.revision_count, 0);
    }

    #[test]
    fn revision_then_pass_counts_one_revision() {
        let p = problem();
        let cfg = config(10);
        let gateway = ScriptedBackend::new([
            fenced("good(1)."),
            fenced("good(2)."),
            fenced("OPERATION: PASS"),
            fenced("yes"),
        ]);
        let solver = FakeSolver::new();
        let reference = ReferenceDoc::none();
        let runner = SessionRunner {
            config: &cfg,
            reference: &reference,
            gateway: &gateway,
            solver: &solver,
        };
        let t = runner.run(&p);
        assert_eq!(t.final_status, SessionStatus::Passed);
        assert_eq!(t.revision_count, 1);
        assert_eq!(solver.call_count(), 2);
    }

    #[test]
    fn unfenced_formatter_response_is_a_protocol_violation() {
        let p = problem();
        let cfg = config(10);
        let gateway = ScriptedBackend::new([
            fenced("good(1)."),
            fenced("OPERATION: PASS"),
            "no fence".to_string(),
        ]);
        let solver = FakeSolver::new();
        let reference = ReferenceDoc::none();
        let runner = SessionRunner {
            config: &cfg,
            reference: &reference,
            gateway: &gateway,
            solver: &solver,
        };
        let t = runner.run(&p);
        assert!(matches!(t.final_status, SessionStatus::ProtocolViolation(_)));
        assert!(t.final_answer.is_none());
        assert!(t.formatter.is_some());
    }

    #[test]
    fn backend_failure_is_reported_not_panicked() {
        let p = problem();
        let cfg = config(10);
        let gateway = ScriptedBackend::new(Vec::<String>::new());
        let solver = FakeSolver::new();
        let reference = ReferenceDoc::none();
        let runner = SessionRunner {
            config: &cfg,
            reference: &reference,
            gateway: &gateway,
            solver: &solver,
        };
        let t = runner.run(&p);
        assert!(matches!(t.final_status, SessionStatus::BackendFailure(_)));
        assert!(t.iterations.is_empty());
    }

    #[test]
    fn pass_after_unsat_is_forwarded_to_formatter() {
        let p = problem();
        let cfg = config(10);
        let gateway = ScriptedBackend::new([
            fenced("nomodel(1)."),
            fenced("OPERATION: PASS"),
            fenced("UNSAT"),
        ]);
        let solver = FakeSolver::new();
        let reference = ReferenceDoc::none();
        let runner = SessionRunner {
            config: &cfg,
            reference: &reference,
            gateway: &gateway,
            solver: &solver,
        };
        let t = runner.run(&p);
        assert_eq!(t.final_status, SessionStatus::Passed);
        assert_eq!(t.final_answer, Some(FinalAnswer::UnsatSentinel));
    }
}

//! asp-forge core: drive an LLM to write ASP programs for natural-language
//! reasoning problems, execute them with clingo, feed structured solver
//! output back for iterative self-correction, and grade the results.
//!
//! Modules follow the pipeline: [`prompting`] builds the generator/formatter
//! prompts, [`gateway`] talks to the model (live, replay, or scripted),
//! [`protocol`] parses the UPDATE/PASS responses, [`solver`] runs clingo and
//! classifies outcomes, [`session`] drives the revision loop, and [`eval`]
//! grades transcripts and computes run metrics.

pub mod atoms;
pub mod domain;
pub mod eval;
pub mod gateway;
pub mod prompting;
pub mod protocol;
pub mod session;
pub mod solver;

pub use atoms::{parse_answer_set, parse_atom, Atom, AtomSet, ParseError, Term};
pub use domain::{
    AspProgram, ErrorCategory, FinalAnswer, GeneratorAction, GroundTruth, Problem, ReferenceDoc,
    ReferenceKind, RunConfig, RunMetrics, SessionStatus, SessionTranscript, SolverOutcome,
    TaskKind, TokenUsage,
};
pub use eval::{compute_metrics, grade_session, Verdict};
pub use gateway::{
    request_digest, HttpBackend, LlmBackend, LlmRequest, LlmResponse, RecordingBackend,
    ReplayBackend, ReplayRecord, ReplayStore, ScriptedBackend,
};
pub use session::SessionRunner;
pub use solver::{ClingoSolver, Solver, SolverError, SolverLimits};

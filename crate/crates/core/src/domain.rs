//! Shared domain types used by every other module.
//!
//! Everything here is an immutable value type, safe to share across
//! concurrently running sessions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::atoms::AtomSet;

/// What shape of answer a benchmark instance expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Grid-assignment tasks: every entity gets one value per category.
    Assignment,
    /// Single-token answers from a declared label set.
    Label,
    /// Blocksworld-style move sequences.
    Plan,
}

/// Ground truth, shaped per task kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroundTruth {
    /// entity -> category -> value.
    Assignment(BTreeMap<String, BTreeMap<String, String>>),
    /// Expected label plus the declared label set it belongs to.
    Label {
        label: String,
        label_set: Vec<String>,
    },
    /// Initial and goal configurations as `on(X,Y)` facts.
    Plan { init: Vec<String>, goal: Vec<String> },
}

/// One benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    /// Benchmark tag used for per-benchmark metric breakdowns.
    pub benchmark: String,
    /// Natural-language problem statement fed to the generator.
    pub text: String,
    pub task_kind: TaskKind,
    pub ground_truth: GroundTruth,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl Problem {
    /// Check that the ground-truth variant matches the task kind and that a
    /// label ground truth is a member of its declared label set.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("problem id is empty".into());
        }
        if self
            .id
            .chars()
            .any(|c| c.is_whitespace() || c == '/' || c == '\\')
        {
            return Err(format!(
                "problem id {:?} contains whitespace or path separators",
                self.id
            ));
        }
        match (&self.task_kind, &self.ground_truth) {
            (TaskKind::Assignment, GroundTruth::Assignment(_)) => Ok(()),
            (TaskKind::Label, GroundTruth::Label { label, label_set }) => {
                if label_set.contains(label) {
                    Ok(())
                } else {
                    Err(format!(
                        "label {label:?} is not in the declared label set {label_set:?}"
                    ))
                }
            }
            (TaskKind::Plan, GroundTruth::Plan { .. }) => Ok(()),
            (kind, _) => Err(format!("ground_truth does not match task_kind {kind:?}")),
        }
    }
}

/// Which reference document accompanies the generator prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "path")]
pub enum ReferenceKind {
    None,
    /// The long model-generated summary of the clingo manual, user-supplied.
    Standard,
    /// The bundled compact guide restricted to common ASP constructs.
    Compact,
    Custom(String),
}

/// A reference document with its kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceDoc {
    pub kind: ReferenceKind,
    pub body: String,
}

impl ReferenceDoc {
    pub fn none() -> Self {
        ReferenceDoc {
            kind: ReferenceKind::None,
            body: String::new(),
        }
    }

    /// Informational size estimate (body length / 4); no tokenizer in scope.
    pub fn approx_tokens(&self) -> usize {
        self.body.len() / 4
    }
}

/// An ASP program exactly as extracted from a fenced block; never reformatted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AspProgram {
    pub source: String,
}

impl AspProgram {
    pub fn new(source: impl Into<String>) -> Self {
        AspProgram {
            source: source.into(),
        }
    }
}

/// The generator's parsed decision: rewrite the program, or accept the
/// current solver output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action")]
pub enum GeneratorAction {
    Update { program: AspProgram },
    Pass,
}

/// Four-way classification of a clingo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SolverOutcome {
    SyntaxError {
        stderr: String,
    },
    Timeout {
        limit_s: f64,
    },
    Sat {
        answer_sets: Vec<AtomSet>,
        raw_stdout: String,
        raw_stderr: String,
    },
    Unsat {
        raw_stdout: String,
    },
}

/// Input/output token counts; zero when the backend cannot report them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input: u64,
    pub output: u64,
}

/// Run settings. Defaults follow the experimental setup: 10 revisions,
/// an 80-second solver limit, one model, temperature 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub max_revisions: u32,
    pub solver_time_limit_s: f64,
    pub max_models: u32,
    pub temperature: f64,
    pub reference: ReferenceKind,
    pub model_id: String,
    pub parallelism: usize,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_revisions: 10,
            solver_time_limit_s: 80.0,
            max_models: 1,
            temperature: 1.0,
            reference: ReferenceKind::Compact,
            model_id: String::new(),
            parallelism: 4,
            output_dir: "out".into(),
        }
    }
}

/// How a session ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum SessionStatus {
    Passed,
    BudgetExhausted,
    ProtocolViolation(String),
    BackendFailure(String),
}

/// The formatter's parsed final answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "body")]
pub enum FinalAnswer {
    Text(String),
    UnsatSentinel,
    ErrorSentinel,
}

/// Wall-clock spent in one iteration, milliseconds. Excluded from replay
/// equality checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallTimes {
    pub generator_ms: u64,
    pub solver_ms: u64,
}

/// One generator round: prompt, raw response, parsed action, and the solver
/// outcome when the action was an update that fit the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub prompt_text: String,
    pub raw_response: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parsed_action: Option<GeneratorAction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_outcome: Option<SolverOutcome>,
    pub wall_times: WallTimes,
    pub token_usage: TokenUsage,
}

/// The formatter call, kept separate from generator iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatterRecord {
    pub prompt_text: String,
    pub raw_response: String,
    pub wall_ms: u64,
    pub token_usage: TokenUsage,
}

/// Full audit trail of one problem's revision loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub problem_id: String,
    /// Snapshot of the problem, so a transcript replays without the dataset.
    pub problem: Problem,
    pub config: RunConfig,
    pub iterations: Vec<IterationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formatter: Option<FormatterRecord>,
    pub final_status: SessionStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<FinalAnswer>,
    /// Updates beyond the first; the initial program is an update but not a
    /// revision.
    pub revision_count: u32,
}

impl SessionTranscript {
    /// Number of Update actions recorded.
    pub fn update_count(&self) -> usize {
        self.iterations
            .iter()
            .filter(|it| matches!(it.parsed_action, Some(GeneratorAction::Update { .. })))
            .count()
    }

    /// The last solver outcome, i.e. the one final answers derive from.
    pub fn last_outcome(&self) -> Option<&SolverOutcome> {
        self.iterations
            .iter()
            .rev()
            .find_map(|it| it.solver_outcome.as_ref())
    }
}

/// revision count = max(0, updates - 1).
pub fn revision_count_from_updates(updates: usize) -> u32 {
    updates.saturating_sub(1) as u32
}

/// Failure taxonomy for final programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    /// The final program fails to compile.
    Syntax,
    /// The final program does not terminate within the limit.
    Timeout,
    /// The final program produces an answer set, but it is incorrect.
    SatIncorrect,
    /// The final program is unsatisfiable.
    Unsat,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] = [
        ErrorCategory::Syntax,
        ErrorCategory::Timeout,
        ErrorCategory::SatIncorrect,
        ErrorCategory::Unsat,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ErrorCategory::Syntax => "syntax",
            ErrorCategory::Timeout => "timeout",
            ErrorCategory::SatIncorrect => "sat_incorrect",
            ErrorCategory::Unsat => "unsat",
        }
    }
}

/// Aggregate figures for one slice of a run (overall or one benchmark).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBucket {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub avg_revisions: f64,
    /// Sessions that ended with a PASS decision.
    pub pass_denominator: usize,
    /// Passed sessions whose accepted answer was actually wrong.
    pub pass_incorrect: usize,
    /// `None` means undefined (no session passed); reported as "N/A".
    pub false_accept_rate: Option<f64>,
    pub error_counts: BTreeMap<ErrorCategory, usize>,
}

/// Metrics for a whole run, overall and per benchmark tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub overall: MetricsBucket,
    pub per_benchmark: BTreeMap<String, MetricsBucket>,
}

/// "5.06% (50/989)", or "N/A (0/0)" when no session passed.
pub fn format_false_accept(bucket: &MetricsBucket) -> String {
    match bucket.false_accept_rate {
        Some(rate) => format!(
            "{:.2}% ({}/{})",
            rate * 100.0,
            bucket.pass_incorrect,
            bucket.pass_denominator
        ),
        None => format!("N/A ({}/{})", bucket.pass_incorrect, bucket.pass_denominator),
    }
}

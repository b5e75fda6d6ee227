//! Grade final answers against ground truth, classify failures, and compute
//! aggregate metrics.
//!
//! Grading consumes the canned machine-readable answer formats the formatter
//! is instructed to produce. It is a pure function of (final answer, ground
//! truth): re-grading stored transcripts yields identical verdicts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::atoms::{parse_atom, Term};
use crate::domain::{
    ErrorCategory, FinalAnswer, GroundTruth, MetricsBucket, Problem, RunMetrics, SessionStatus,
    SessionTranscript, SolverOutcome,
};

/// Grading outcome for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub problem_id: String,
    pub benchmark: String,
    pub correct: bool,
    /// Whether the pipeline issued a final PASS decision; the false-accept
    /// denominator.
    pub passed: bool,
    pub revision_count: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_category: Option<ErrorCategory>,
    pub details: String,
}

/// Normalize answer tokens: lowercase, every non-alphanumeric run becomes a
/// single underscore. Makes "Benson & Hedges", "benson_hedges" and
/// "sci-fi"/"sci_fi" compare equal; extend here if a benchmark needs more.
pub fn normalize_token(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_sep = false;
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.push(c.to_ascii_lowercase());
        } else {
            pending_sep = true;
        }
    }
    out
}

/// Check an assignment answer in `entity | category | value` line format
/// against the ground-truth map. Every ground-truth cell must be present and
/// equal; lines that do not look like cells are ignored; contradictory
/// duplicate cells fail.
pub fn check_assignment(
    answer: &str,
    truth: &BTreeMap<String, BTreeMap<String, String>>,
) -> Result<(), String> {
    let mut cells: BTreeMap<(String, String), String> = BTreeMap::new();
    let mut parsed_any = false;
    for line in answer.lines() {
        let parts: Vec<&str> = line.split('|').collect();
        if parts.len() != 3 {
            continue;
        }
        parsed_any = true;
        let entity = normalize_token(parts[0]);
        let category = normalize_token(parts[1]);
        let value = normalize_token(parts[2]);
        if let Some(previous) = cells.insert((entity.clone(), category.clone()), value.clone()) {
            if previous != value {
                return Err(format!(
                    "contradictory cells for {entity}/{category}: {previous:?} vs {value:?}"
                ));
            }
        }
    }
    if !parsed_any {
        return Err("unparseable answer: no `entity | category | value` lines".into());
    }
    for (entity, categories) in truth {
        for (category, value) in categories {
            let key = (normalize_token(entity), normalize_token(category));
            match cells.get(&key) {
                None => {
                    return Err(format!("missing cell for entity {entity:?}, category {category:?}"));
                }
                Some(got) if *got != normalize_token(value) => {
                    return Err(format!(
                        "wrong value for {entity}/{category}: expected {value:?}, got {got:?}"
                    ));
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

/// Check a label answer: normalized single-token equality. Sentinels never
/// match a label.
pub fn check_label(answer: &FinalAnswer, truth: &str) -> Result<(), String> {
    let text = match answer {
        FinalAnswer::Text(body) => body,
        FinalAnswer::UnsatSentinel => return Err("UNSAT sentinel is not a label".into()),
        FinalAnswer::ErrorSentinel => return Err("ERROR sentinel is not a label".into()),
    };
    let trimmed = text.trim();
    if trimmed.split_whitespace().count() != 1 {
        return Err(format!("expected exactly one token, got {trimmed:?}"));
    }
    if normalize_token(trimmed) == normalize_token(truth) {
        Ok(())
    } else {
        Err(format!("label {trimmed:?} does not match expected {truth:?}"))
    }
}

/// One parsed plan step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Move {
    pub block: String,
    pub target: String,
    pub step: i64,
}

/// Block configuration: which location (block or table) each block rests on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlocksState {
    on: BTreeMap<String, String>,
}

impl BlocksState {
    /// Build from `on(X,Y)` facts, checking the configuration invariants:
    /// one location per block, no cycles.
    pub fn from_facts(facts: &[String]) -> Result<Self, String> {
        let mut on = BTreeMap::new();
        for fact in facts {
            let atom = parse_atom(fact).map_err(|e| format!("bad fact {fact:?}: {e}"))?;
            if atom.predicate != "on" || atom.args.len() != 2 {
                return Err(format!("expected on(X,Y) fact, got {fact:?}"));
            }
            let name = |t: &Term| match t {
                Term::Symbol(s) => Ok(s.clone()),
                other => Err(format!("expected a symbol in {fact:?}, got {other:?}")),
            };
            let block = name(&atom.args[0])?;
            let loc = name(&atom.args[1])?;
            if on.insert(block.clone(), loc).is_some() {
                return Err(format!("block {block:?} has two locations"));
            }
        }
        let state = BlocksState { on };
        state.check_acyclic()?;
        Ok(state)
    }

    fn check_acyclic(&self) -> Result<(), String> {
        for start in self.on.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = start.clone();
            while let Some(next) = self.on.get(&cur) {
                if !seen.insert(cur.clone()) {
                    return Err(format!("cycle in on-relation involving {start:?}"));
                }
                cur = next.clone();
            }
        }
        Ok(())
    }

    pub fn blocks(&self) -> BTreeSet<String> {
        let mut blocks: BTreeSet<String> = self.on.keys().cloned().collect();
        for loc in self.on.values() {
            if loc != "table" {
                blocks.insert(loc.clone());
            }
        }
        blocks
    }

    pub fn location_of(&self, block: &str) -> Option<&str> {
        self.on.get(block).map(String::as_str)
    }

    fn something_on(&self, loc: &str) -> Option<&str> {
        self.on
            .iter()
            .find(|(_, l)| l.as_str() == loc)
            .map(|(b, _)| b.as_str())
    }

    /// Whether `goal` holds in this state (every goal fact present).
    pub fn satisfies(&self, goal: &BlocksState) -> bool {
        goal.on
            .iter()
            .all(|(b, l)| self.on.get(b).map(|cur| cur == l).unwrap_or(false))
    }
}

/// Parse plan lines of the form `move(X,Y,T)`. Blank lines are skipped;
/// anything else must parse as a move atom.
pub fn parse_plan(answer: &str) -> Result<Vec<Move>, String> {
    let mut moves = Vec::new();
    for line in answer.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let atom = parse_atom(line).map_err(|e| format!("bad plan line {line:?}: {e}"))?;
        if atom.predicate != "move" || atom.args.len() != 3 {
            return Err(format!("expected move(X,Y,T), got {line:?}"));
        }
        let sym = |t: &Term| match t {
            Term::Symbol(s) => Ok(s.clone()),
            other => Err(format!("expected a symbol in {line:?}, got {other:?}")),
        };
        let step = match &atom.args[2] {
            Term::Integer(n) => *n,
            other => return Err(format!("expected an integer step in {line:?}, got {other:?}")),
        };
        moves.push(Move {
            block: sym(&atom.args[0])?,
            target: sym(&atom.args[1])?,
            step,
        });
    }
    moves.sort_by_key(|m| m.step);
    for (i, m) in moves.iter().enumerate() {
        if m.step != (i + 1) as i64 {
            return Err(format!(
                "plan steps must be contiguous 1..n: step {} found at position {}",
                m.step,
                i + 1
            ));
        }
    }
    Ok(moves)
}

/// Simulate a plan from the initial state and check the goal after the last
/// move. Legality per step: the moved block exists and is clear, the target
/// is a different block or the table, and a block target is clear.
pub fn validate_plan(moves: &[Move], init: &BlocksState, goal: &BlocksState) -> Result<(), String> {
    let blocks = init.blocks();
    let mut state = init.clone();
    for m in moves {
        if !blocks.contains(&m.block) {
            return Err(format!("step {}: {:?} is not a block", m.step, m.block));
        }
        if m.target != "table" && !blocks.contains(&m.target) {
            return Err(format!(
                "step {}: target {:?} is neither a block nor the table",
                m.step, m.target
            ));
        }
        if m.block == m.target {
            return Err(format!("step {}: cannot move {:?} onto itself", m.step, m.block));
        }
        if let Some(b) = state.something_on(&m.block) {
            return Err(format!(
                "step {}: {:?} is not clear ({b:?} is on it)",
                m.step, m.block
            ));
        }
        if m.target != "table" {
            if let Some(b) = state.something_on(&m.target) {
                if b != m.block {
                    return Err(format!(
                        "step {}: target {:?} is not clear ({b:?} is on it)",
                        m.step, m.target
                    ));
                }
            }
        }
        state.on.insert(m.block.clone(), m.target.clone());
    }
    if state.satisfies(goal) {
        Ok(())
    } else {
        let missing: Vec<String> = goal
            .on
            .iter()
            .filter(|(b, l)| state.on.get(*b) != Some(l))
            .map(|(b, l)| format!("on({b},{l})"))
            .collect();
        Err(format!(
            "goal not reached after {} move(s); unsatisfied: {}",
            moves.len(),
            missing.join(" ")
        ))
    }
}

/// Text-level plan check: parse the answer lines, then simulate.
pub fn check_plan(answer: &str, init: &[String], goal: &[String]) -> Result<(), String> {
    let init = BlocksState::from_facts(init)?;
    let goal = BlocksState::from_facts(goal)?;
    let moves = parse_plan(answer)?;
    validate_plan(&moves, &init, &goal)
}

/// Grade a final answer against the problem's ground truth.
pub fn grade_answer(answer: &FinalAnswer, problem: &Problem) -> Result<(), String> {
    match &problem.ground_truth {
        GroundTruth::Assignment(truth) => match answer {
            FinalAnswer::Text(body) => check_assignment(body, truth),
            FinalAnswer::UnsatSentinel => Err("UNSAT sentinel for an assignment task".into()),
            FinalAnswer::ErrorSentinel => Err("ERROR sentinel for an assignment task".into()),
        },
        GroundTruth::Label { label, .. } => check_label(answer, label),
        GroundTruth::Plan { init, goal } => match answer {
            FinalAnswer::Text(body) => check_plan(body, init, goal),
            FinalAnswer::UnsatSentinel => Err("UNSAT sentinel for a plan task".into()),
            FinalAnswer::ErrorSentinel => Err("ERROR sentinel for a plan task".into()),
        },
    }
}

/// Assign the failure category of the final program: the last solver
/// outcome's bucket, with Sat-but-wrong split out. Sessions that never
/// reached the solver land in Syntax (no usable program), noted in details.
pub fn classify_final_error(transcript: &SessionTranscript) -> (ErrorCategory, Option<String>) {
    match transcript.last_outcome() {
        Some(SolverOutcome::SyntaxError { .. }) => (ErrorCategory::Syntax, None),
        Some(SolverOutcome::Timeout { .. }) => (ErrorCategory::Timeout, None),
        Some(SolverOutcome::Sat { .. }) => (ErrorCategory::SatIncorrect, None),
        Some(SolverOutcome::Unsat { .. }) => (ErrorCategory::Unsat, None),
        None => (
            ErrorCategory::Syntax,
            Some("no solver outcome recorded; bucketed as Syntax (no usable program)".into()),
        ),
    }
}

/// Grade one transcript into a verdict. Sessions that did not pass are never
/// correct.
pub fn grade_session(transcript: &SessionTranscript) -> Verdict {
    let passed = transcript.final_status == SessionStatus::Passed;
    let (correct, mut details) = if passed {
        match transcript.final_answer.as_ref() {
            Some(answer) => match grade_answer(answer, &transcript.problem) {
                Ok(()) => (true, String::new()),
                Err(reason) => (false, reason),
            },
            None => (false, "passed session without a final answer".into()),
        }
    } else {
        (false, format!("session status: {:?}", transcript.final_status))
    };
    let error_category = if correct {
        None
    } else {
        let (category, note) = classify_final_error(transcript);
        if let Some(note) = note {
            if !details.is_empty() {
                details.push_str("; ");
            }
            details.push_str(&note);
        }
        Some(category)
    };
    Verdict {
        problem_id: transcript.problem_id.clone(),
        benchmark: transcript.problem.benchmark.clone(),
        correct,
        passed,
        revision_count: transcript.revision_count,
        error_category,
        details,
    }
}

fn bucket_of(verdicts: &[&Verdict]) -> MetricsBucket {
    let total = verdicts.len();
    let correct = verdicts.iter().filter(|v| v.correct).count();
    let pass_denominator = verdicts.iter().filter(|v| v.passed).count();
    let pass_incorrect = verdicts.iter().filter(|v| v.passed && !v.correct).count();
    let mut error_counts = BTreeMap::new();
    for v in verdicts {
        if let Some(category) = v.error_category {
            *error_counts.entry(category).or_insert(0) += 1;
        }
    }
    MetricsBucket {
        total,
        correct,
        accuracy: if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        },
        avg_revisions: if total == 0 {
            0.0
        } else {
            verdicts.iter().map(|v| v.revision_count as f64).sum::<f64>() / total as f64
        },
        pass_denominator,
        pass_incorrect,
        false_accept_rate: if pass_denominator == 0 {
            None
        } else {
            Some(pass_incorrect as f64 / pass_denominator as f64)
        },
        error_counts,
    }
}

/// Aggregate verdicts into overall and per-benchmark metrics. A pure fold:
/// the same verdicts always produce identical metrics.
pub fn compute_metrics(verdicts: &[Verdict]) -> RunMetrics {
    let all: Vec<&Verdict> = verdicts.iter().collect();
    let mut per_benchmark = BTreeMap::new();
    let mut tags: Vec<&str> = verdicts.iter().map(|v| v.benchmark.as_str()).collect();
    tags.sort_unstable();
    tags.dedup();
    for tag in tags {
        let subset: Vec<&Verdict> = verdicts.iter().filter(|v| v.benchmark == tag).collect();
        per_benchmark.insert(tag.to_string(), bucket_of(&subset));
    }
    RunMetrics {
        overall: bucket_of(&all),
        per_benchmark,
    }
}

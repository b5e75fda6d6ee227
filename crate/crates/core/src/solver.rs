//! Run ASP programs with an external clingo process and classify the result.
//!
//! Classification goes by stream content rather than exit codes: clingo's
//! exit codes encode composite conditions, while the four outcome categories
//! are defined behaviorally. The wall-clock limit is enforced by killing the
//! child process, so hangs during grounding are caught too. Incremental
//! programs (`#include <incmode>.`) run unmodified; clingo drives the steps.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::atoms::{parse_answer_set, AtomSet};
use crate::domain::{AspProgram, SolverOutcome};

/// Environment variable overriding the clingo executable.
pub const CLINGO_ENV: &str = "ASP_FORGE_CLINGO";

/// Per-invocation limits. Defaults: 80 s wall clock, one model.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverLimits {
    pub time_limit_s: f64,
    pub max_models: u32,
}

impl Default for SolverLimits {
    fn default() -> Self {
        SolverLimits {
            time_limit_s: 80.0,
            max_models: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("clingo executable not found: {0}")]
    NotFound(String),
    #[error("failed to spawn solver: {0}")]
    Spawn(String),
    #[error("solver io: {0}")]
    Io(String),
    #[error("cannot classify solver output: {message}\nstdout:\n{stdout}\nstderr:\n{stderr}")]
    Ambiguous {
        message: String,
        stdout: String,
        stderr: String,
    },
}

/// Anything that can execute an ASP program. Sessions only see this trait,
/// so tests can script outcomes without a solver process.
pub trait Solver: Send + Sync {
    fn run(&self, program: &AspProgram, limits: &SolverLimits) -> Result<SolverOutcome, SolverError>;
}

/// Resolve the clingo executable: explicit path, then `ASP_FORGE_CLINGO`,
/// then `clingo` on the search path.
pub fn locate_clingo(explicit: Option<&Path>) -> Result<PathBuf, SolverError> {
    if let Some(p) = explicit {
        return Ok(p.to_path_buf());
    }
    if let Ok(p) = std::env::var(CLINGO_ENV) {
        if !p.is_empty() {
            return Ok(PathBuf::from(p));
        }
    }
    let path_var = std::env::var_os("PATH").unwrap_or_default();
    for dir in std::env::split_paths(&path_var) {
        let candidate = dir.join("clingo");
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    Err(SolverError::NotFound(
        "no `clingo` on PATH; set solver.path, --solver-path, or ASP_FORGE_CLINGO \
         (tools/clingo wraps the clingo Python package)"
            .into(),
    ))
}

/// Adapter around an external clingo binary.
///
/// Each invocation owns a private child process and temp file, so any number
/// may run concurrently.
pub struct ClingoSolver {
    executable: PathBuf,
    /// When set, program files are kept here instead of deleted.
    keep_dir: Option<PathBuf>,
    seq: AtomicU64,
}

impl ClingoSolver {
    pub fn new(executable: PathBuf) -> Self {
        ClingoSolver {
            executable,
            keep_dir: None,
            seq: AtomicU64::new(0),
        }
    }

    pub fn with_keep_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.keep_dir = dir;
        self
    }

    fn write_program(&self, program: &AspProgram) -> Result<(tempfile::TempPath, PathBuf), SolverError> {
        let file = tempfile::Builder::new()
            .prefix("asp-forge-")
            .suffix(".lp")
            .tempfile()
            .map_err(|e| SolverError::Io(e.to_string()))?;
        let mut source = program.source.clone();
        if !source.ends_with('\n') {
            source.push('\n');
        }
        std::fs::write(file.path(), source).map_err(|e| SolverError::Io(e.to_string()))?;
        let path = file.path().to_path_buf();
        Ok((file.into_temp_path(), path))
    }

    fn keep_copy(&self, src: &Path) {
        if let Some(dir) = &self.keep_dir {
            let n = self.seq.fetch_add(1, Ordering::Relaxed);
            if std::fs::create_dir_all(dir).is_ok() {
                let _ = std::fs::copy(src, dir.join(format!("prog-{n:04}.lp")));
            }
        }
    }
}

impl Solver for ClingoSolver {
    fn run(&self, program: &AspProgram, limits: &SolverLimits) -> Result<SolverOutcome, SolverError> {
        let (_temp, path) = self.write_program(program)?;
        self.keep_copy(&path);

        let mut child = Command::new(&self.executable)
            .arg(&path)
            .arg(limits.max_models.to_string())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    SolverError::NotFound(self.executable.display().to_string())
                } else {
                    SolverError::Spawn(e.to_string())
                }
            })?;

        let mut stdout_pipe = child.stdout.take().expect("stdout piped");
        let mut stderr_pipe = child.stderr.take().expect("stderr piped");
        let out_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stdout_pipe.read_to_end(&mut buf);
            buf
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr_pipe.read_to_end(&mut buf);
            buf
        });

        let deadline = Instant::now() + Duration::from_secs_f64(limits.time_limit_s);
        let timed_out = loop {
            match child.try_wait().map_err(|e| SolverError::Io(e.to_string()))? {
                Some(_) => break false,
                None => {
                    if Instant::now() >= deadline {
                        let _ = child.kill();
                        let _ = child.wait();
                        break true;
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
            }
        };

        let stdout_bytes = out_reader.join().unwrap_or_default();
        let stderr_bytes = err_reader.join().unwrap_or_default();

        if timed_out {
            return Ok(SolverOutcome::Timeout {
                limit_s: limits.time_limit_s,
            });
        }

        let path_str = path.display().to_string();
        let stdout = normalize_stream(&String::from_utf8_lossy(&stdout_bytes), &path_str);
        let stderr = normalize_stream(&String::from_utf8_lossy(&stderr_bytes), &path_str);
        classify(&stdout, &stderr)
    }
}

/// Make captured streams stable across runs: redact the temp program path
/// and drop per-run timing noise.
fn normalize_stream(stream: &str, program_path: &str) -> String {
    let mut out = String::with_capacity(stream.len());
    for line in stream.lines() {
        let line = line.replace(program_path, "program.lp");
        if line.starts_with("Time ") || line.starts_with("CPU Time") {
            continue;
        }
        // pyclingo suffixes model headers with "(Time: ...)".
        let line = match line.strip_prefix("Answer: ") {
            Some(rest) => match rest.find(" (") {
                Some(cut) => format!("Answer: {}", &rest[..cut]),
                None => line,
            },
            None => line,
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Map terminated-process streams onto the four outcome categories.
///
/// Checks UNSATISFIABLE before SATISFIABLE (the former contains the latter).
/// Anything that fits no category is an explicit error, never silently
/// bucketed.
fn classify(stdout: &str, stderr: &str) -> Result<SolverOutcome, SolverError> {
    let has_token = |tok: &str| stdout.lines().any(|l| l.trim() == tok);
    if has_token("UNSATISFIABLE") {
        return Ok(SolverOutcome::Unsat {
            raw_stdout: stdout.to_string(),
        });
    }
    if has_token("SATISFIABLE") {
        let answer_sets = extract_models(stdout).map_err(|message| SolverError::Ambiguous {
            message,
            stdout: stdout.to_string(),
            stderr: stderr.to_string(),
        })?;
        if answer_sets.is_empty() {
            return Err(SolverError::Ambiguous {
                message: "SATISFIABLE but no Answer lines".into(),
                stdout: stdout.to_string(),
                stderr: stderr.to_string(),
            });
        }
        return Ok(SolverOutcome::Sat {
            answer_sets,
            raw_stdout: stdout.to_string(),
            raw_stderr: stderr.to_string(),
        });
    }
    if stderr.lines().any(|l| l.contains("error:")) {
        return Ok(SolverOutcome::SyntaxError {
            stderr: stderr.to_string(),
        });
    }
    Err(SolverError::Ambiguous {
        message: "no SATISFIABLE/UNSATISFIABLE in stdout and no error: in stderr".into(),
        stdout: stdout.to_string(),
        stderr: stderr.to_string(),
    })
}

fn extract_models(stdout: &str) -> Result<Vec<AtomSet>, String> {
    let lines: Vec<&str> = stdout.lines().collect();
    let mut models = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.starts_with("Answer:") {
            let model_line = lines.get(i + 1).copied().unwrap_or("");
            let set = parse_answer_set(model_line)
                .map_err(|e| format!("model line {}: {e}", i + 2))?;
            models.push(set);
        }
    }
    Ok(models)
}

/// The "Models" summary value as printed by clingo (e.g. `1+` or `2`).
fn models_line_value(raw_stdout: &str, fallback: usize) -> String {
    raw_stdout
        .lines()
        .find(|l| l.starts_with("Models"))
        .and_then(|l| l.split(':').nth(1))
        .map(|v| v.trim().to_string())
        .unwrap_or_else(|| format!("{fallback}+"))
}

fn format_seconds(limit_s: f64) -> String {
    if limit_s.fract() == 0.0 {
        format!("{}", limit_s as i64)
    } else {
        format!("{limit_s}")
    }
}

/// Render an outcome the way the candidate-answer-set and formatter prompts
/// present solver stdout: `Answer Set N:` headers, a blank line before each
/// model, the SATISFIABLE/UNSATISFIABLE verdict, and the Models summary.
pub fn render_solver_stdout(outcome: &SolverOutcome) -> String {
    match outcome {
        SolverOutcome::Sat {
            answer_sets,
            raw_stdout,
            ..
        } => {
            let mut out = String::from("Solving...\n");
            for (i, set) in answer_sets.iter().enumerate() {
                out.push_str(&format!("\nAnswer Set {}: \n\n{}\n", i + 1, set));
            }
            out.push_str("\nSATISFIABLE\n\n\n\nModels       : ");
            out.push_str(&models_line_value(raw_stdout, answer_sets.len()));
            out.push('\n');
            out
        }
        SolverOutcome::Unsat { .. } => {
            "Solving...\n\nUNSATISFIABLE\n\n\n\nModels       : 0\n".to_string()
        }
        SolverOutcome::SyntaxError { .. } => "UNKNOWN\n".to_string(),
        SolverOutcome::Timeout { limit_s } => format!(
            "TIMEOUT: solving was aborted after exceeding the timeout limit of {} seconds.\n",
            format_seconds(*limit_s)
        ),
    }
}

/// Render the candidate-answer-set block body fed back to the generator:
/// a `stdout:` section, plus a `stderr:` section when stderr is non-empty.
pub fn format_feedback(outcome: &SolverOutcome) -> String {
    let mut out = String::from(
        "Here is the candidate answer set to solve the problem, from running the ASP program:\nstdout:\n",
    );
    out.push_str(&render_solver_stdout(outcome));
    let stderr = match outcome {
        SolverOutcome::SyntaxError { stderr } => stderr.as_str(),
        SolverOutcome::Sat { raw_stderr, .. } => raw_stderr.as_str(),
        _ => "",
    };
    if !stderr.trim().is_empty() {
        out.push_str("stderr:\n");
        out.push_str(stderr);
        if !stderr.ends_with('\n') {
            out.push('\n');
        }
    }
    out
}

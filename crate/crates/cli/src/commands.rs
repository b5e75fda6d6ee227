//! Command implementations behind the CLI surface.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};

use asp_forge_core::domain::{
    FinalAnswer, Problem, ReferenceDoc, RunConfig, RunMetrics, SessionStatus, SessionTranscript,
};
use asp_forge_core::eval::{compute_metrics, grade_session, Verdict};
use asp_forge_core::gateway::{ReplayBackend, ReplayRecord, ReplayStore};
use asp_forge_core::prompting::{generate_reference, load_reference, ReferenceRecipe};
use asp_forge_core::session::{scrub_wall_times, SessionRunner};
use asp_forge_core::solver::{locate_clingo, ClingoSolver};

use crate::backend::{build_gateway, GatewayHandle};
use crate::config::Settings;
use crate::dataset::Dataset;
use crate::diff::first_difference;
use crate::report::{render, render_markdown, ReportFormat};
use crate::transcripts::{load_transcripts, load_verdicts, write_transcript, write_verdicts};

fn load_reference_doc(settings: &Settings) -> Result<ReferenceDoc> {
    load_reference(&settings.run.reference, settings.standard_reference.as_deref())
        .map_err(|e| anyhow::anyhow!("{e}"))
}

fn build_solver(settings: &Settings, out_dir: &Path) -> Result<ClingoSolver> {
    let exe = locate_clingo(settings.solver_path.as_deref()).map_err(|e| anyhow::anyhow!("{e}"))?;
    let keep = settings
        .keep_programs
        .then(|| out_dir.join("programs"));
    Ok(ClingoSolver::new(exe).with_keep_dir(keep))
}

/// Run every problem through the session loop with bounded parallelism.
fn run_batch(
    problems: &[Problem],
    config: &RunConfig,
    reference: &ReferenceDoc,
    gateway: &GatewayHandle,
    solver: &ClingoSolver,
) -> Vec<SessionTranscript> {
    let runner = SessionRunner {
        config,
        reference,
        gateway: gateway.backend(),
        solver,
    };
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<SessionTranscript>>> =
        Mutex::new((0..problems.len()).map(|_| None).collect());
    let workers = config.parallelism.max(1).min(problems.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= problems.len() {
                    break;
                }
                let transcript = runner.run(&problems[i]);
                slots.lock().unwrap()[i] = Some(transcript);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|t| t.expect("every slot filled"))
        .collect()
}

struct TrialResult {
    transcripts: Vec<SessionTranscript>,
    verdicts: Vec<Verdict>,
    metrics: RunMetrics,
}

fn run_once(problems: &[Problem], settings: &Settings, out_dir: &Path) -> Result<TrialResult> {
    let mut config = settings.run.clone();
    config.output_dir = out_dir.display().to_string();
    let reference = load_reference_doc(settings)?;
    let solver = build_solver(settings, out_dir)?;
    let gateway = build_gateway(settings)?;

    let transcripts = run_batch(problems, &config, &reference, &gateway, &solver);
    for t in &transcripts {
        write_transcript(out_dir, t)?;
    }
    let verdicts: Vec<Verdict> = transcripts.iter().map(grade_session).collect();
    write_verdicts(out_dir, &verdicts)?;

    if let Some(record_path) = &settings.record_path {
        gateway.save_recording(record_path)?;
        eprintln!("recorded replay store: {}", record_path.display());
    }

    let metrics = compute_metrics(&verdicts);
    Ok(TrialResult {
        transcripts,
        verdicts,
        metrics,
    })
}

fn backend_failures(transcripts: &[SessionTranscript]) -> usize {
    transcripts
        .iter()
        .filter(|t| matches!(t.final_status, SessionStatus::BackendFailure(_)))
        .count()
}

fn population_std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

/// `run`: batch-drive a dataset, persist transcripts and verdicts, print a
/// summary. Exit 0 iff no backend failure occurred.
pub fn cmd_run(dataset_path: &Path, settings: &Settings) -> Result<i32> {
    let dataset = Dataset::load(dataset_path)?;
    let out_root = PathBuf::from(&settings.run.output_dir);

    if settings.trials <= 1 {
        let result = run_once(&dataset.problems, settings, &out_root)?;
        println!(
            "{} problem(s), {} correct",
            result.metrics.overall.total, result.metrics.overall.correct
        );
        print!("{}", render_markdown(&result.metrics));
        let failures = backend_failures(&result.transcripts);
        if failures > 0 {
            eprintln!("{failures} session(s) ended in backend failure");
            return Ok(1);
        }
        return Ok(0);
    }

    if settings.record_path.is_some() {
        bail!("--record is only supported with a single trial");
    }
    let mut failures = 0;
    let mut trial_metrics = Vec::new();
    for trial in 1..=settings.trials {
        let dir = out_root.join(format!("trial-{trial}"));
        let result = run_once(&dataset.problems, settings, &dir)?;
        println!("trial {trial}/{}:", settings.trials);
        print!("{}", render_markdown(&result.metrics));
        failures += backend_failures(&result.transcripts);
        trial_metrics.push(result.metrics);
    }
    let mut tags: Vec<String> = trial_metrics
        .iter()
        .flat_map(|m| m.per_benchmark.keys().cloned())
        .collect();
    tags.sort();
    tags.dedup();
    println!("mean accuracy across {} trials (± population std dev):", settings.trials);
    for tag in tags {
        let accs: Vec<f64> = trial_metrics
            .iter()
            .filter_map(|m| m.per_benchmark.get(&tag).map(|b| b.accuracy * 100.0))
            .collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        println!("  {tag}: {mean:.1} ± {:.2}", population_std_dev(&accs));
    }
    let overall: Vec<f64> = trial_metrics
        .iter()
        .map(|m| m.overall.accuracy * 100.0)
        .collect();
    let mean = overall.iter().sum::<f64>() / overall.len() as f64;
    println!("  overall: {mean:.1} ± {:.2}", population_std_dev(&overall));
    Ok(if failures > 0 { 1 } else { 0 })
}

/// `solve`: run a single problem and print the transcript summary plus the
/// final answer.
pub fn cmd_solve(problem_file: &Path, settings: &Settings) -> Result<i32> {
    let dataset = Dataset::load(problem_file)?;
    if dataset.len() != 1 {
        bail!(
            "{} holds {} problems; `solve` expects exactly one (use `run` for batches)",
            problem_file.display(),
            dataset.len()
        );
    }
    let out_dir = PathBuf::from(&settings.run.output_dir);
    let result = run_once(&dataset.problems, settings, &out_dir)?;
    let transcript = &result.transcripts[0];
    let verdict = &result.verdicts[0];

    println!("problem: {}", transcript.problem_id);
    println!("status: {:?}", transcript.final_status);
    println!("revisions: {}", transcript.revision_count);
    println!("iterations: {}", transcript.iterations.len());
    println!(
        "graded: {}",
        if verdict.correct { "correct" } else { "incorrect" }
    );
    if !verdict.details.is_empty() {
        println!("details: {}", verdict.details);
    }
    match &transcript.final_answer {
        Some(FinalAnswer::Text(body)) => println!("final answer:\n{body}"),
        Some(FinalAnswer::UnsatSentinel) => println!("final answer: UNSAT"),
        Some(FinalAnswer::ErrorSentinel) => println!("final answer: ERROR"),
        None => println!("final answer: (none)"),
    }
    Ok(if backend_failures(&result.transcripts) > 0 { 1 } else { 0 })
}

/// Build a replay store from the exchanges recorded in transcripts.
fn store_from_transcripts(transcripts: &[SessionTranscript]) -> ReplayStore {
    let mut store = ReplayStore::new();
    for t in transcripts {
        for it in &t.iterations {
            store.push(ReplayRecord {
                digest: asp_forge_core::request_digest(&t.config.model_id, &it.prompt_text),
                model: t.config.model_id.clone(),
                prompt: it.prompt_text.clone(),
                response: it.raw_response.clone(),
                usage: it.token_usage,
            });
        }
        if let Some(f) = &t.formatter {
            store.push(ReplayRecord {
                digest: asp_forge_core::request_digest(&t.config.model_id, &f.prompt_text),
                model: t.config.model_id.clone(),
                prompt: f.prompt_text.clone(),
                response: f.raw_response.clone(),
                usage: f.token_usage,
            });
        }
    }
    store
}

/// `replay`: re-execute each transcript against a store synthesized from it
/// and assert byte-equality (wall times excluded). Exit 0 iff all match.
pub fn cmd_replay(transcript_dir: &Path, settings: &Settings) -> Result<i32> {
    let transcripts = load_transcripts(transcript_dir)?;
    let solver = build_solver(settings, transcript_dir)?;
    let mut divergences = 0;
    for original in &transcripts {
        let store = store_from_transcripts(std::slice::from_ref(original));
        let backend = ReplayBackend::new(&store);
        let reference = load_reference(
            &original.config.reference,
            settings.standard_reference.as_deref(),
        )
        .map_err(|e| anyhow::anyhow!("{}: {e}", original.problem_id))?;
        let runner = SessionRunner {
            config: &original.config,
            reference: &reference,
            gateway: &backend,
            solver: &solver,
        };
        let mut replayed = runner.run(&original.problem);
        let mut expected = original.clone();
        scrub_wall_times(&mut replayed);
        scrub_wall_times(&mut expected);
        let a = serde_json::to_value(&expected)?;
        let b = serde_json::to_value(&replayed)?;
        match first_difference(&a, &b) {
            None => println!("{}: ok", original.problem_id),
            Some(path) => {
                println!("{}: DIVERGED at {path}", original.problem_id);
                divergences += 1;
            }
        }
    }
    if divergences > 0 {
        eprintln!("{divergences} transcript(s) diverged");
        Ok(1)
    } else {
        println!("{} transcript(s) replayed identically", transcripts.len());
        Ok(0)
    }
}

/// `report`: recompute metrics from persisted verdicts and render them.
pub fn cmd_report(run_dir: &Path, format: ReportFormat) -> Result<i32> {
    let verdicts = load_verdicts(run_dir)?;
    let metrics = compute_metrics(&verdicts);
    print!("{}", render(&metrics, format));
    Ok(0)
}

/// `make-reference`: generate a standard or compact reference document.
pub fn cmd_make_reference(
    source: &Path,
    recipe: ReferenceRecipe,
    out: &Path,
    settings: &Settings,
) -> Result<i32> {
    let document = std::fs::read_to_string(source)
        .with_context(|| format!("cannot read source {}", source.display()))?;
    let gateway = build_gateway(settings)?;
    let doc = generate_reference(
        &document,
        recipe,
        gateway.backend(),
        &settings.run.model_id,
        settings.run.temperature,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    if let Some(record_path) = &settings.record_path {
        gateway.save_recording(record_path)?;
    }
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out, &doc.body).with_context(|| format!("cannot write {}", out.display()))?;
    println!(
        "wrote {} ({} bytes, ~{} tokens)",
        out.display(),
        doc.body.len(),
        doc.approx_tokens()
    );
    Ok(0)
}

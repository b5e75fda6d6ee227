use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use asp_forge_cli::commands::{cmd_make_reference, cmd_replay, cmd_report, cmd_run, cmd_solve};
use asp_forge_cli::config::{load_settings, Overrides, Settings};
use asp_forge_cli::report::ReportFormat;
use asp_forge_core::prompting::ReferenceRecipe;

/// Drive an LLM to write ASP programs, execute them with clingo, and grade
/// the results.
#[derive(Parser)]
#[command(name = "asp-forge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct CommonArgs {
    /// TOML config file with sections {gateway, solver, run, paths}.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model id sent to the backend.
    #[arg(long)]
    model: Option<String>,
    /// Reference document: none, standard, compact, or a file path.
    #[arg(long)]
    reference: Option<String>,
    /// Maximum revisions after the initial program.
    #[arg(long)]
    max_revisions: Option<u32>,
    /// Solver wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Models requested from clingo per solve.
    #[arg(long)]
    max_models: Option<u32>,
    /// Concurrent sessions.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Repeat the run N times into trial-N subdirectories.
    #[arg(long)]
    trials: Option<u32>,
    /// Output directory for transcripts, verdicts, and reports.
    #[arg(long)]
    out: Option<String>,
    /// Backend: http, replay:PATH, or scripted:PATH.
    #[arg(long)]
    backend: Option<String>,
    /// Record every completion into a replay store at PATH.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Path to the clingo executable.
    #[arg(long)]
    solver_path: Option<PathBuf>,
    /// Keep generated .lp program files under <out>/programs.
    #[arg(long)]
    keep_programs: bool,
    /// Path to the standard reference document.
    #[arg(long)]
    standard_reference: Option<PathBuf>,
}

impl CommonArgs {
    fn settings(&self) -> Result<Settings> {
        let overrides = Overrides {
            model: self.model.clone(),
            reference: self.reference.clone(),
            max_revisions: self.max_revisions,
            time_limit: self.time_limit,
            max_models: self.max_models,
            parallelism: self.parallelism,
            trials: self.trials,
            out: self.out.clone(),
            backend: self.backend.clone(),
            record: self.record.clone(),
            solver_path: self.solver_path.clone(),
            keep_programs: self.keep_programs,
            standard_reference: self.standard_reference.clone(),
        };
        load_settings(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every problem in a dataset through the revision loop.
    Run {
        /// Dataset JSONL, one problem per line.
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a single problem and print its transcript summary.
    Solve {
        /// JSONL file holding exactly one problem.
        problem_file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Re-execute recorded transcripts and verify byte-identical replay.
    Replay {
        /// Directory of *.transcript.json files.
        transcript_dir: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render metrics from a run directory's verdicts.
    Report {
        /// Run directory containing verdicts.jsonl.
        run_dir: PathBuf,
        /// Output format: markdown, csv, or json.
        #[arg(long, default_value = "markdown")]
        format: String,
    },
    /// Generate a standard or compact ASP reference document.
    MakeReference {
        /// Source document (e.g. the extracted solver guide text).
        #[arg(long)]
        source: PathBuf,
        /// Recipe: standard or compact.
        #[arg(long)]
        recipe: String,
        /// Where to write the generated reference.
        #[arg(long, name = "out-file")]
        out_file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { dataset, common } => cmd_run(&dataset, &common.settings()?),
        Command::Solve {
            problem_file,
            common,
        } => cmd_solve(&problem_file, &common.settings()?),
        Command::Replay {
            transcript_dir,
            common,
        } => cmd_replay(&transcript_dir, &common.settings()?),
        Command::Report { run_dir, format } => {
            let Some(format) = ReportFormat::parse(&format) else {
                bail!("unknown format {format:?}: expected markdown, csv, or json");
            };
            cmd_report(&run_dir, format)
        }
        Command::MakeReference {
            source,
            recipe,
            out_file,
            common,
        } => {
            let recipe = match recipe.as_str() {
                "standard" => ReferenceRecipe::Standard,
                "compact" => ReferenceRecipe::Compact,
                other => bail!("unknown recipe {other:?}: expected standard or compact"),
            };
            cmd_make_reference(&source, recipe, &out_file, &common.settings()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

//! Transcript and verdict persistence.
//!
//! One JSON file per session (`<problem_id>.transcript.json`) with stable
//! field ordering, plus a `verdicts.jsonl` per run.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use asp_forge_core::domain::SessionTranscript;
use asp_forge_core::eval::Verdict;

pub fn transcript_path(dir: &Path, problem_id: &str) -> PathBuf {
    dir.join(format!("{problem_id}.transcript.json"))
}

pub fn write_transcript(dir: &Path, transcript: &SessionTranscript) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))?;
    let path = transcript_path(dir, &transcript.problem_id);
    let mut json = serde_json::to_string_pretty(transcript)?;
    json.push('\n');
    std::fs::write(&path, json).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Load every `*.transcript.json` in a directory, sorted by file name.
pub fn load_transcripts(dir: &Path) -> Result<Vec<SessionTranscript>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.ends_with(".transcript.json"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no transcripts in {}", dir.display());
    }
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let transcript: SessionTranscript = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse {}", path.display()))?;
        out.push(transcript);
    }
    Ok(out)
}

pub fn verdicts_path(dir: &Path) -> PathBuf {
    dir.join("verdicts.jsonl")
}

pub fn write_verdicts(dir: &Path, verdicts: &[Verdict]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))?;
    let path = verdicts_path(dir);
    let mut out = String::new();
    for v in verdicts {
        out.push_str(&serde_json::to_string(v)?);
        out.push('\n');
    }
    std::fs::write(&path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Load verdicts; an absent or empty file yields an empty list.
pub fn load_verdicts(dir: &Path) -> Result<Vec<Verdict>> {
    let path = verdicts_path(dir);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Verdict = serde_json::from_str(line)
            .with_context(|| format!("{} line {}: invalid verdict", path.display(), n + 1))?;
        out.push(v);
    }
    Ok(out)
}

//! Dataset ingestion: JSONL, one problem per line, validated on load.

use std::path::Path;

use anyhow::{bail, Context, Result};

use asp_forge_core::domain::Problem;

/// An ordered, validated list of problems.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub problems: Vec<Problem>,
}

impl Dataset {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read dataset {}", path.display()))?;
        let mut problems = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let problem: Problem = serde_json::from_str(line)
                .with_context(|| format!("{} line {}: invalid problem record", path.display(), n + 1))?;
            problem
                .validate()
                .map_err(|e| anyhow::anyhow!("{} line {}: {e}", path.display(), n + 1))?;
            problems.push(problem);
        }
        if problems.is_empty() {
            bail!("{}: dataset contains no problems", path.display());
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &problems {
            if !seen.insert(p.id.clone()) {
                bail!("duplicate problem id {:?} in {}", p.id, path.display());
            }
        }
        Ok(Dataset { problems })
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"id":"a","benchmark":"b","text":"t","task_kind":"label","ground_truth":{"label":"yes","label_set":["yes","no"]}}"#;

    #[test]
    fn loads_valid_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        std::fs::write(&path, format!("{GOOD}\n")).unwrap();
        let d = Dataset::load(&path).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.problems[0].id, "a");
    }

    #[test]
    fn duplicate_ids_are_rejected_naming_the_id() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        std::fs::write(&path, format!("{GOOD}\n{GOOD}\n")).unwrap();
        let err = Dataset::load(&path).unwrap_err().to_string();
        assert!(err.contains("duplicate problem id"), "{err}");
        assert!(err.contains("\"a\""), "{err}");
    }

    #[test]
    fn mismatched_ground_truth_is_rejected() {
        let bad = r#"{"id":"x","benchmark":"b","text":"t","task_kind":"plan","ground_truth":{"label":"yes","label_set":["yes"]}}"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        std::fs::write(&path, format!("{bad}\n")).unwrap();
        assert!(Dataset::load(&path).is_err());
    }
}

//! Construct the completion backend from a spec, optionally wrapped in a
//! recorder.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

use asp_forge_core::gateway::{
    HttpBackend, LlmBackend, RecordingBackend, ReplayBackend, ReplayStore, ScriptedBackend,
};

use crate::config::{BackendSpec, Settings};

/// One line of a scripted-responses file.
#[derive(Deserialize)]
struct ScriptedLine {
    response: String,
}

fn load_scripted(path: &Path) -> Result<ScriptedBackend> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read scripted responses {}", path.display()))?;
    let mut responses = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ScriptedLine = serde_json::from_str(line)
            .with_context(|| format!("{} line {}: expected {{\"response\": ...}}", path.display(), n + 1))?;
        responses.push(parsed.response);
    }
    Ok(ScriptedBackend::new(responses))
}

/// A backend plus its optional recorder, kept so the store can be saved
/// after the run.
pub enum GatewayHandle {
    Plain(Box<dyn LlmBackend>),
    Recording(RecordingBackend<Box<dyn LlmBackend>>),
}

impl GatewayHandle {
    pub fn backend(&self) -> &dyn LlmBackend {
        match self {
            GatewayHandle::Plain(b) => b.as_ref(),
            GatewayHandle::Recording(r) => r,
        }
    }

    /// Persist the recorded store, when recording.
    pub fn save_recording(&self, path: &Path) -> Result<()> {
        match self {
            GatewayHandle::Plain(_) => Ok(()),
            GatewayHandle::Recording(r) => {
                r.save(path)
                    .with_context(|| format!("cannot save replay store {}", path.display()))
            }
        }
    }
}

/// Build the backend named by the settings.
pub fn build_gateway(settings: &Settings) -> Result<GatewayHandle> {
    let inner: Box<dyn LlmBackend> = match &settings.backend {
        BackendSpec::Http => Box::new(
            HttpBackend::from_env(settings.base_url.as_deref())
                .map_err(|e| anyhow::anyhow!("http backend: {e}"))?,
        ),
        BackendSpec::Replay(path) => {
            let store = ReplayStore::load(path).map_err(|e| anyhow::anyhow!("{e}"))?;
            Box::new(ReplayBackend::new(&store))
        }
        BackendSpec::Scripted(path) => Box::new(load_scripted(path)?),
    };
    Ok(if settings.record_path.is_some() {
        GatewayHandle::Recording(RecordingBackend::new(inner))
    } else {
        GatewayHandle::Plain(inner)
    })
}

//! Layered configuration: TOML file sections {gateway, solver, run, paths},
//! every key overridable by a CLI flag; flags win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use asp_forge_core::domain::{ReferenceKind, RunConfig};

/// Which completion backend to use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Http,
    Replay(PathBuf),
    Scripted(PathBuf),
}

impl BackendSpec {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "http" {
            return Ok(BackendSpec::Http);
        }
        if let Some(path) = s.strip_prefix("replay:") {
            return Ok(BackendSpec::Replay(PathBuf::from(path)));
        }
        if let Some(path) = s.strip_prefix("scripted:") {
            return Ok(BackendSpec::Scripted(PathBuf::from(path)));
        }
        bail!("unknown backend {s:?}: expected http, replay:PATH, or scripted:PATH");
    }
}

/// Parse a `--reference` value: none, standard, compact, or a file path.
pub fn parse_reference(s: &str) -> ReferenceKind {
    match s {
        "none" => ReferenceKind::None,
        "standard" => ReferenceKind::Standard,
        "compact" => ReferenceKind::Compact,
        path => ReferenceKind::Custom(path.to_string()),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    gateway: GatewaySection,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    paths: PathsSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GatewaySection {
    model: Option<String>,
    base_url: Option<String>,
    backend: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    path: Option<PathBuf>,
    time_limit_s: Option<f64>,
    max_models: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    max_revisions: Option<u32>,
    temperature: Option<f64>,
    parallelism: Option<usize>,
    reference: Option<String>,
    trials: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathsSection {
    output_dir: Option<String>,
    standard_reference: Option<PathBuf>,
}

/// Fully resolved settings for a command.
#[derive(Debug, Clone)]
pub struct Settings {
    pub run: RunConfig,
    pub backend: BackendSpec,
    pub base_url: Option<String>,
    pub solver_path: Option<PathBuf>,
    pub standard_reference: Option<PathBuf>,
    pub record_path: Option<PathBuf>,
    pub keep_programs: bool,
    pub trials: u32,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            run: RunConfig::default(),
            backend: BackendSpec::Http,
            base_url: None,
            solver_path: None,
            standard_reference: None,
            record_path: None,
            keep_programs: false,
            trials: 1,
        }
    }
}

/// Flag-level overrides, applied on top of the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub model: Option<String>,
    pub reference: Option<String>,
    pub max_revisions: Option<u32>,
    pub time_limit: Option<f64>,
    pub max_models: Option<u32>,
    pub parallelism: Option<usize>,
    pub trials: Option<u32>,
    pub out: Option<String>,
    pub backend: Option<String>,
    pub record: Option<PathBuf>,
    pub solver_path: Option<PathBuf>,
    pub keep_programs: bool,
    pub standard_reference: Option<PathBuf>,
}

/// Load the config file (when given), then apply flag overrides.
pub fn load_settings(config_path: Option<&Path>, overrides: &Overrides) -> Result<Settings> {
    let mut settings = Settings::default();

    if let Some(path) = config_path {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let file: FileConfig = toml::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        if let Some(m) = file.gateway.model {
            settings.run.model_id = m;
        }
        settings.base_url = file.gateway.base_url;
        if let Some(b) = file.gateway.backend {
            settings.backend = BackendSpec::parse(&b)?;
        }
        settings.solver_path = file.solver.path;
        if let Some(t) = file.solver.time_limit_s {
            settings.run.solver_time_limit_s = t;
        }
        if let Some(m) = file.solver.max_models {
            settings.run.max_models = m;
        }
        if let Some(r) = file.run.max_revisions {
            settings.run.max_revisions = r;
        }
        if let Some(t) = file.run.temperature {
            settings.run.temperature = t;
        }
        if let Some(p) = file.run.parallelism {
            settings.run.parallelism = p;
        }
        if let Some(r) = file.run.reference {
            settings.run.reference = parse_reference(&r);
        }
        if let Some(t) = file.run.trials {
            settings.trials = t;
        }
        if let Some(o) = file.paths.output_dir {
            settings.run.output_dir = o;
        }
        settings.standard_reference = file.paths.standard_reference;
    }

    let o = overrides;
    if let Some(m) = &o.model {
        settings.run.model_id = m.clone();
    }
    if let Some(r) = &o.reference {
        settings.run.reference = parse_reference(r);
    }
    if let Some(n) = o.max_revisions {
        settings.run.max_revisions = n;
    }
    if let Some(t) = o.time_limit {
        settings.run.solver_time_limit_s = t;
    }
    if let Some(n) = o.max_models {
        settings.run.max_models = n;
    }
    if let Some(p) = o.parallelism {
        settings.run.parallelism = p.max(1);
    }
    if let Some(t) = o.trials {
        settings.trials = t.max(1);
    }
    if let Some(out) = &o.out {
        settings.run.output_dir = out.clone();
    }
    if let Some(b) = &o.backend {
        settings.backend = BackendSpec::parse(b)?;
    }
    if o.record.is_some() {
        settings.record_path = o.record.clone();
    }
    if o.solver_path.is_some() {
        settings.solver_path = o.solver_path.clone();
    }
    if o.keep_programs {
        settings.keep_programs = true;
    }
    if o.standard_reference.is_some() {
        settings.standard_reference = o.standard_reference.clone();
    }

    if settings.run.solver_time_limit_s <= 0.0 {
        bail!("solver time limit must be positive");
    }
    if settings.run.max_models < 1 {
        bail!("max_models must be at least 1");
    }
    Ok(settings)
}

use std::path::PathBuf;

use asp_forge_core::solver::locate_clingo;

/// Resolve a clingo executable for tests: ASP_FORGE_CLINGO, then PATH, then
/// the bundled `tools/clingo` wrapper.
pub fn clingo_path() -> PathBuf {
    if let Ok(p) = locate_clingo(None) {
        return p;
    }
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../tools/clingo")
        .canonicalize()
        .expect("tools/clingo is part of the repo")
}

//! Batch front end: kernel values and sweeps to CSV, verification suites to
//! JSON, and seeded simulations.
//!
//! A run is described by a [`RunConfig`], read from TOML and adjusted by
//! command-line flags. [`dispatch`] computes every artifact in memory, so a
//! failed run writes nothing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use config::RunConfig;
pub use run::{dispatch, num, Artifact, Outcome, RunError};

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| e.error)?;
    let _ = fs::metadata(path)?;
    Ok(())
}

/// Writes every artifact of a finished run; `None` paths go to stdout.
pub fn emit(outcome: &Outcome) -> std::io::Result<()> {
    for a in &outcome.artifacts {
        match &a.path {
            Some(p) => write_atomic(p, &a.contents)?,
            None => std::io::stdout().write_all(a.contents.as_bytes())?,
        }
    }
    Ok(())
}

//! Report emission: canonical JSON, CSV tables and static SVG plots.
//!
//! Every file is rendered fully in memory and written atomically, and every
//! renderer is a pure function of its input, so identical inputs produce
//! identical bytes.

mod csv;
mod json;
mod svg;

use std::path::{Path, PathBuf};

use crate::atomic::write_atomic;
use crate::error::{Error, Result};
use crate::telemetry::{RunComparison, Snapshot, TrackReport};

pub use csv::{categories_csv, diversity_csv, sandbox_trace_csv, sweep_csv, DiversityRow, SandboxArm};
pub use json::{canonical_json, canonicalize, format_float, read_json, round_significant};
pub use svg::{bars_svg, curve_svg, embedding_svg, trajectory_svg, Series};

/// Writes `text` to `dir/name` atomically and returns the path.
pub fn emit_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::output(dir, e))?;
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Writes the canonical JSON of `s` and returns the byte count.
pub fn emit_snapshot_json(s: &Snapshot, path: &Path) -> Result<u64> {
    let text = canonical_json(s)?;
    write_atomic(path, text.as_bytes())?;
    Ok(text.len() as u64)
}

/// snapshot.json, categories.csv, embedding.svg and bars.svg.
pub fn emit_snapshot_reports(s: &Snapshot, dir: &Path, tracked: &[usize]) -> Result<Vec<PathBuf>> {
    Ok(vec![
        emit_text(dir, "snapshot.json", &canonical_json(s)?)?,
        emit_text(dir, "categories.csv", &categories_csv(s))?,
        emit_text(dir, "embedding.svg", &embedding_svg(s, tracked))?,
        emit_text(dir, "bars.svg", &bars_svg(s))?,
    ])
}

/// trajectory.json and trajectory.svg.
pub fn emit_track_reports(r: &TrackReport, dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(vec![
        emit_text(dir, "trajectory.json", &canonical_json(r)?)?,
        emit_text(dir, "trajectory.svg", &trajectory_svg(r))?,
    ])
}

pub fn emit_comparison_json(c: &RunComparison, dir: &Path) -> Result<PathBuf> {
    emit_text(dir, "comparison.json", &canonical_json(c)?)
}

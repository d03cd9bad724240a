//! Run manifests and cross-file validation.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::MatrixF32;
use crate::store::concepts::{first_non_unit_row, read_word_list, AnchorSet, ConceptSpace, WordEntry};
use crate::store::matrix_file::load_matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub run_id: String,
    pub probe_count: usize,
    pub concepts: ConceptFiles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<AnchorFiles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_images: Option<Vec<String>>,
    /// Identifier of the encoder that produced the text/probe embeddings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder: Option<String>,
    /// Probe images the exporter could not decode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped_images: Vec<String>,
    pub layers: Vec<LayerEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptFiles {
    pub words: PathBuf,
    pub embeddings: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_sims: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorFiles {
    pub words: PathBuf,
    pub embeddings: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    pub name: String,
    pub neurons: usize,
    pub checkpoints: Vec<CheckpointEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointEntry {
    pub epoch: u64,
    pub activations: PathBuf,
}

impl RunManifest {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.into(),
            line: e.line(),
            message: format!("column {}: {e}", e.column()),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn layer(&self, name: &str) -> Option<&LayerEntry> {
        self.layers.iter().find(|l| l.name == name)
    }
}

impl LayerEntry {
    pub fn checkpoint(&self, epoch: u64) -> Option<&CheckpointEntry> {
        self.checkpoints.iter().find(|c| c.epoch == epoch)
    }

    pub fn epochs(&self) -> Vec<u64> {
        self.checkpoints.iter().map(|c| c.epoch).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub message: String,
}

/// Outcome of every cross-file check performed on a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub manifest: PathBuf,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// One line per check.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{tag} {}: {}\n", c.name, c.message));
        }
        let n_fail = self.failures().count();
        out.push_str(&format!(
            "{} checks, {} failed: {}\n",
            self.checks.len(),
            n_fail,
            if n_fail == 0 { "run is valid" } else { "run is INVALID" }
        ));
        out
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, name: impl Into<String>, result: std::result::Result<String, String>) -> bool {
        let passed = result.is_ok();
        let message = result.unwrap_or_else(|e| e);
        self.0.push(Check {
            name: name.into(),
            passed,
            message,
        });
        passed
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn base_dir(manifest: &Path) -> PathBuf {
    manifest
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn load_checked(path: &Path) -> std::result::Result<MatrixF32, String> {
    load_matrix(path).map_err(|e| e.to_string())
}

/// Validates every file a manifest references and all cross-file dimension
/// relations. Only an unreadable or unparseable manifest is an `Err`; every
/// other problem is a failed check in the report.
pub fn validate_run(manifest_path: &Path) -> Result<ValidationReport> {
    let manifest = RunManifest::read(manifest_path)?;
    Ok(validate_manifest(manifest_path, &manifest))
}

pub fn validate_manifest(manifest_path: &Path, m: &RunManifest) -> ValidationReport {
    let base = base_dir(manifest_path);
    let mut checks = Checks(Vec::new());
    let n_probe = m.probe_count;

    checks.push(
        "probe count",
        if n_probe >= 2 {
            Ok(format!("N_probe = {n_probe}"))
        } else {
            Err(format!("probe count must be at least 2, got {n_probe}"))
        },
    );

    if let Some(images) = &m.probe_images {
        checks.push(
            "probe image list",
            if images.len() == n_probe {
                Ok(format!("{} identifiers", images.len()))
            } else {
                Err(format!(
                    "probe image list has {} entries, expected {n_probe}",
                    images.len()
                ))
            },
        );
    }

    // concept vocabulary
    let words_path = resolve(&base, &m.concepts.words);
    let concepts: Option<Vec<WordEntry>> = match read_word_list(&words_path) {
        Ok(w) if w.is_empty() => {
            checks.push("concept words", Err(format!("{} is empty", words_path.display())));
            None
        }
        Ok(w) => {
            let missing_cat = w.iter().filter(|e| e.category.is_none()).count();
            checks.push(
                "concept words",
                if missing_cat == 0 {
                    Ok(format!("{} concepts", w.len()))
                } else {
                    Err(format!("{missing_cat} concepts lack a category column"))
                },
            );
            Some(w)
        }
        Err(e) => {
            checks.push("concept words", Err(e.to_string()));
            None
        }
    };
    let n_concepts = concepts.as_ref().map(Vec::len);

    let emb_path = resolve(&base, &m.concepts.embeddings);
    let concept_dim = match load_checked(&emb_path) {
        Ok(emb) => {
            let ok = checks.push(
                "concept embedding rows",
                match n_concepts {
                    Some(n) if n != emb.rows() => Err(format!(
                        "concept embeddings have {} rows for {n} concepts",
                        emb.rows()
                    )),
                    _ => Ok(format!("{}x{}", emb.rows(), emb.cols())),
                },
            );
            checks.push(
                "concept embedding norms",
                match first_non_unit_row(&emb) {
                    Some((i, norm)) => Err(format!("row {i} has norm {norm}")),
                    None => Ok("all rows unit-norm".into()),
                },
            );
            ok.then_some(emb.cols())
        }
        Err(e) => {
            checks.push("concept embeddings", Err(e));
            None
        }
    };

    if m.concepts.probe_sims.is_none() && m.concepts.probe_labels.is_none() {
        checks.push(
            "detector inputs",
            Err("need probe_sims and/or probe_labels".into()),
        );
    }
    if let Some(p) = &m.concepts.probe_sims {
        let path = resolve(&base, p);
        checks.push(
            "probe similarity matrix",
            load_checked(&path).and_then(|sims| {
                if sims.rows() != n_probe {
                    Err(format!(
                        "probe count mismatch: probe_sims has {} rows, expected {n_probe}",
                        sims.rows()
                    ))
                } else if n_concepts.is_some_and(|n| n != sims.cols()) {
                    Err(format!(
                        "probe_sims has {} columns for {} concepts",
                        sims.cols(),
                        n_concepts.unwrap()
                    ))
                } else {
                    Ok(format!("{}x{}", sims.rows(), sims.cols()))
                }
            }),
        );
    }
    if let Some(p) = &m.concepts.probe_labels {
        let path = resolve(&base, p);
        checks.push(
            "probe label matrix",
            load_checked(&path).and_then(|labels| {
                if labels.rows() != n_probe {
                    Err(format!(
                        "probe count mismatch: probe_labels has {} rows, expected {n_probe}",
                        labels.rows()
                    ))
                } else if n_concepts.is_some_and(|n| n != labels.cols()) {
                    Err(format!(
                        "probe_labels has {} columns for {} concepts",
                        labels.cols(),
                        n_concepts.unwrap()
                    ))
                } else if labels.as_slice().iter().any(|&v| v != 0.0 && v != 1.0) {
                    Err("probe_labels must be binary (0/1)".into())
                } else {
                    Ok(format!("{}x{}", labels.rows(), labels.cols()))
                }
            }),
        );
    }

    if let Some(a) = &m.anchors {
        let words_path = resolve(&base, &a.words);
        let n_anchors = match read_word_list(&words_path) {
            Ok(w) if w.is_empty() => {
                checks.push("anchor words", Err(format!("{} is empty", words_path.display())));
                None
            }
            Ok(w) => {
                checks.push("anchor words", Ok(format!("{} anchors", w.len())));
                Some(w.len())
            }
            Err(e) => {
                checks.push("anchor words", Err(e.to_string()));
                None
            }
        };
        match load_checked(&resolve(&base, &a.embeddings)) {
            Ok(emb) => {
                checks.push(
                    "anchor embedding rows",
                    match n_anchors {
                        Some(n) if n != emb.rows() => Err(format!(
                            "anchor embeddings have {} rows for {n} anchors",
                            emb.rows()
                        )),
                        _ => Ok(format!("{}x{}", emb.rows(), emb.cols())),
                    },
                );
                checks.push(
                    "anchor embedding norms",
                    match first_non_unit_row(&emb) {
                        Some((i, norm)) => Err(format!("row {i} has norm {norm}")),
                        None => Ok("all rows unit-norm".into()),
                    },
                );
                if let Some(d) = concept_dim {
                    checks.push(
                        "anchor embedding dimension",
                        if d == emb.cols() {
                            Ok(format!("d = {d}"))
                        } else {
                            Err(format!(
                                "embedding dimension mismatch: concepts d={d}, anchors d={}",
                                emb.cols()
                            ))
                        },
                    );
                }
            }
            Err(e) => {
                checks.push("anchor embeddings", Err(e));
            }
        }
    }

    checks.push(
        "layers",
        if m.layers.is_empty() {
            Err("manifest lists no layers".into())
        } else {
            Ok(format!("{} layers", m.layers.len()))
        },
    );
    let mut names = HashSet::new();
    for layer in &m.layers {
        if !names.insert(layer.name.as_str()) {
            checks.push(format!("layer {}", layer.name), Err("duplicate layer name".into()));
        }
        checks.push(
            format!("layer {} shape", layer.name),
            if layer.neurons == 0 {
                Err("neuron count must be positive".into())
            } else if layer.checkpoints.is_empty() {
                Err("no checkpoints".into())
            } else {
                Ok(format!(
                    "{} neurons, {} checkpoints",
                    layer.neurons,
                    layer.checkpoints.len()
                ))
            },
        );
        let increasing = layer.checkpoints.windows(2).all(|w| w[0].epoch < w[1].epoch);
        checks.push(
            format!("layer {} epoch order", layer.name),
            if increasing {
                Ok("strictly increasing".into())
            } else {
                Err(format!(
                    "epochs not strictly increasing: {:?}",
                    layer.epochs()
                ))
            },
        );
    }

    // activation files are the bulk of the bytes; load them concurrently
    let jobs: Vec<(&LayerEntry, &CheckpointEntry)> = m
        .layers
        .iter()
        .flat_map(|l| l.checkpoints.iter().map(move |c| (l, c)))
        .collect();
    let results: Vec<(String, std::result::Result<String, String>)> = jobs
        .par_iter()
        .map(|(layer, ckpt)| {
            let name = format!("activations {}@{}", layer.name, ckpt.epoch);
            let path = resolve(&base, &ckpt.activations);
            let result = load_checked(&path).and_then(|q| {
                if q.rows() != n_probe {
                    Err(format!(
                        "probe count mismatch layer={}, epoch={}: {} rows, expected {n_probe}",
                        layer.name,
                        ckpt.epoch,
                        q.rows()
                    ))
                } else if q.cols() != layer.neurons {
                    Err(format!(
                        "neuron count mismatch layer={}, epoch={}: {} columns, expected {}",
                        layer.name,
                        ckpt.epoch,
                        q.cols(),
                        layer.neurons
                    ))
                } else {
                    Ok(format!("{}x{}", q.rows(), q.cols()))
                }
            });
            (name, result)
        })
        .collect();
    for (name, result) in results {
        checks.push(name, result);
    }

    ValidationReport {
        manifest: manifest_path.to_path_buf(),
        checks: checks.0,
    }
}

/// A validated run with its concept space and anchors loaded. Activation
/// matrices are loaded on demand.
#[derive(Debug, Clone)]
pub struct Run {
    base: PathBuf,
    manifest: RunManifest,
    concepts: ConceptSpace,
    anchors: Option<AnchorSet>,
}

impl Run {
    /// Validates the manifest and loads the shared inputs.
    pub fn open(manifest_path: &Path) -> Result<Self> {
        let manifest = RunManifest::read(manifest_path)?;
        let report = validate_manifest(manifest_path, &manifest);
        if !report.passed() {
            let msgs: Vec<String> = report
                .failures()
                .map(|c| format!("{}: {}", c.name, c.message))
                .collect();
            return Err(Error::Validation(msgs.join("\n")));
        }
        let base = base_dir(manifest_path);
        let c = &manifest.concepts;
        let concepts = ConceptSpace::load(
            &resolve(&base, &c.words),
            &resolve(&base, &c.embeddings),
            c.probe_sims.as_deref().map(|p| resolve(&base, p)).as_deref(),
            c.probe_labels.as_deref().map(|p| resolve(&base, p)).as_deref(),
        )?;
        let anchors = manifest
            .anchors
            .as_ref()
            .map(|a| AnchorSet::load(&resolve(&base, &a.words), Some(&resolve(&base, &a.embeddings))))
            .transpose()?;
        Ok(Self {
            base,
            manifest,
            concepts,
            anchors,
        })
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn concepts(&self) -> &ConceptSpace {
        &self.concepts
    }

    /// Anchors declared in the manifest, if any.
    pub fn anchors(&self) -> Option<&AnchorSet> {
        self.anchors.as_ref()
    }

    pub fn layer(&self, name: &str) -> Result<&LayerEntry> {
        self.manifest.layer(name).ok_or_else(|| {
            Error::InvalidInput(format!(
                "layer not found: {name} (available: {})",
                self.manifest
                    .layers
                    .iter()
                    .map(|l| l.name.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
    }

    pub fn activations(&self, layer: &str, epoch: u64) -> Result<MatrixF32> {
        let ckpt = self
            .layer(layer)?
            .checkpoint(epoch)
            .ok_or_else(|| Error::CheckpointNotFound {
                layer: layer.to_string(),
                epoch,
            })?;
        load_matrix(&resolve(&self.base, &ckpt.activations))
    }

    pub fn probe_images(&self) -> Option<&[String]> {
        self.manifest.probe_images.as_deref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_error_has_line_context() {
        let text = "{\n  \"run_id\": \"x\",\n  \"probe_count\": \"many\"\n}";
        let err = RunManifest::parse(Path::new("m.json"), text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("m.json:3:"), "{msg}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"run_id":"x","probe_count":2,"concepts":{"words":"a","embeddings":"b"},"layers":[],"bogus":1}"#;
        assert!(RunManifest::parse(Path::new("m.json"), text).is_err());
    }

    #[test]
    fn missing_files_fail_checks_not_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let text = r#"{"run_id":"x","probe_count":4,"concepts":{"words":"c.tsv","embeddings":"c.cmtx","probe_sims":"p.cmtx"},
            "layers":[{"name":"l","neurons":2,"checkpoints":[{"epoch":3,"activations":"a.cmtx"},{"epoch":1,"activations":"b.cmtx"}]}]}"#;
        std::fs::write(&path, text).unwrap();
        let report = validate_run(&path).unwrap();
        assert!(!report.passed());
        assert!(report
            .failures()
            .any(|c| c.message.contains("epochs not strictly increasing")));
        assert!(report.failures().any(|c| c.name == "activations l@3"));
    }
}

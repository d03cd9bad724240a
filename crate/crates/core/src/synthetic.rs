//! Seeded synthetic runs: a small on-disk reference run with the full file
//! layout, and large in-memory inputs for throughput measurements.

use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::atomic::write_atomic;
use crate::error::{Error, Result};
use crate::matrix::MatrixF32;
use crate::store::{
    write_matrix, AnchorFiles, Category, CheckpointEntry, Concept, ConceptFiles, ConceptSpace, LayerEntry,
    RunManifest,
};

/// Vocabulary of the reference run, in concept-index order.
pub const REFERENCE_CONCEPTS: [(&str, Category); 24] = [
    ("wood", Category::Material),
    ("metal", Category::Material),
    ("glass", Category::Material),
    ("car", Category::Object),
    ("dog", Category::Object),
    ("plane", Category::Object),
    ("chair", Category::Object),
    ("lamp", Category::Object),
    ("kitchen", Category::Scene),
    ("street", Category::Scene),
    ("forest", Category::Scene),
    ("beach", Category::Scene),
    ("zigzagged", Category::Texture),
    ("striped", Category::Texture),
    ("dotted", Category::Texture),
    ("marbled", Category::Texture),
    ("red", Category::Color),
    ("blue", Category::Color),
    ("green", Category::Color),
    ("yellow", Category::Color),
    ("wheel", Category::Part),
    ("leg", Category::Part),
    ("window", Category::Part),
    ("sky", Category::Other),
];

/// Anchors shared with the vocabulary reuse its embeddings; `horse` is new.
pub const REFERENCE_ANCHORS: [&str; 5] = ["car", "plane", "zigzagged", "kitchen", "horse"];

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSpec {
    pub run_id: String,
    pub probes: usize,
    pub embedding_dim: usize,
    /// `(layer name, neuron count)`.
    pub layers: Vec<(String, usize)>,
    pub epochs: Vec<u64>,
    pub seed: u64,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            run_id: "reference".into(),
            probes: 160,
            embedding_dim: 16,
            layers: vec![("layer3".into(), 24), ("layer4".into(), 40)],
            epochs: vec![0, 5, 10],
            seed: 2024,
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `n` Gaussian directions normalized to unit length.
pub fn random_unit_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> MatrixF32 {
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        data.extend(v.iter().map(|x| (x / norm) as f32));
    }
    MatrixF32::from_vec(n, d, data).unwrap()
}

/// CLIP-like probe-concept cosines: a low-rank latent structure around 0.22.
fn probe_sims(rng: &mut ChaCha8Rng, probes: usize, concepts: usize) -> MatrixF32 {
    let rank = 6;
    let z: Vec<f64> = (0..probes * rank).map(|_| normal(rng)).collect();
    let w: Vec<f64> = (0..concepts * rank).map(|_| normal(rng)).collect();
    let mut data = Vec::with_capacity(probes * concepts);
    for k in 0..probes {
        for i in 0..concepts {
            let latent: f64 = (0..rank).map(|r| z[k * rank + r] * w[i * rank + r]).sum();
            let v = 0.22 + 0.025 * latent / (rank as f64).sqrt() + 0.01 * normal(rng);
            data.push(v.clamp(-1.0, 1.0) as f32);
        }
    }
    MatrixF32::from_vec(probes, concepts, data).unwrap()
}

/// 1 for the top tenth of each concept column, 0 elsewhere.
fn probe_labels(p: &MatrixF32) -> MatrixF32 {
    let keep = (p.rows() / 10).max(1);
    let mut out = MatrixF32::filled(p.rows(), p.cols(), 0.0);
    for i in 0..p.cols() {
        let col = p.column(i);
        let mut idx: Vec<usize> = (0..col.len()).collect();
        idx.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then(a.cmp(&b)));
        for &k in &idx[..keep] {
            out.set(k, i, 1.0);
        }
    }
    out
}

fn standardized_column(p: &MatrixF32, i: usize) -> Vec<f64> {
    let col: Vec<f64> = p.column(i).iter().map(|&x| x as f64).collect();
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-12);
    col.iter().map(|x| (x - mean) / sd).collect()
}

/// Activations drifting from noise towards each neuron's target concept as
/// training progresses. Every eleventh neuron is dead (constant zero).
fn layer_activations(
    rng: &mut ChaCha8Rng,
    p: &MatrixF32,
    neurons: usize,
    epochs: &[u64],
) -> Vec<MatrixF32> {
    let probes = p.rows();
    let last = epochs.last().copied().unwrap_or(0).max(1) as f64;
    let targets: Vec<usize> = (0..neurons).map(|_| rng.random_range(0..p.cols())).collect();
    let fixed_noise: Vec<f64> = (0..probes * neurons).map(|_| normal(rng)).collect();
    let signals: Vec<Vec<f64>> = targets.iter().map(|&c| standardized_column(p, c)).collect();
    epochs
        .iter()
        .map(|&e| {
            let t = e as f64 / last;
            let mut data = Vec::with_capacity(probes * neurons);
            for k in 0..probes {
                for n in 0..neurons {
                    if n % 11 == 10 {
                        data.push(0.0);
                        continue;
                    }
                    let v = 2.0 * t * signals[n][k] + (1.2 - t) * fixed_noise[k * neurons + n] + 0.1 * normal(rng);
                    data.push(v as f32);
                }
            }
            MatrixF32::from_vec(probes, neurons, data).unwrap()
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

/// Writes a complete run under `dir` and returns the manifest path. Paths
/// inside the manifest are relative to `dir`.
pub fn write_reference_run(dir: &Path, spec: &ReferenceSpec) -> Result<PathBuf> {
    if spec.probes < 10 || spec.embedding_dim < 2 || spec.layers.is_empty() || spec.epochs.is_empty() {
        return Err(Error::InvalidInput(
            "reference run needs >= 10 probes, d >= 2, a layer and an epoch".into(),
        ));
    }
    std::fs::create_dir_all(dir.join("activations")).map_err(|e| Error::output(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_concepts = REFERENCE_CONCEPTS.len();
    let concept_emb = random_unit_rows(&mut rng, n_concepts, spec.embedding_dim);
    let p = probe_sims(&mut rng, spec.probes, n_concepts);
    let labels = probe_labels(&p);

    let words: String = REFERENCE_CONCEPTS
        .iter()
        .map(|(w, c)| format!("{w}\t{c}\n"))
        .collect();
    write_text(&dir.join("concepts.tsv"), &words)?;
    write_matrix(&concept_emb, &dir.join("concepts.cmtx"))?;
    write_matrix(&p, &dir.join("probe_sims.cmtx"))?;
    write_matrix(&labels, &dir.join("probe_labels.cmtx"))?;

    let fresh = random_unit_rows(&mut rng, 1, spec.embedding_dim);
    let mut anchor_data = Vec::new();
    for w in REFERENCE_ANCHORS {
        match REFERENCE_CONCEPTS.iter().position(|(c, _)| *c == w) {
            Some(i) => anchor_data.extend_from_slice(concept_emb.row(i)),
            None => anchor_data.extend_from_slice(fresh.row(0)),
        }
    }
    let anchor_emb = MatrixF32::from_vec(REFERENCE_ANCHORS.len(), spec.embedding_dim, anchor_data)?;
    let anchor_words: String = REFERENCE_ANCHORS.iter().map(|w| format!("{w}\n")).collect();
    write_text(&dir.join("anchors.tsv"), &anchor_words)?;
    write_matrix(&anchor_emb, &dir.join("anchors.cmtx"))?;

    let mut layers = Vec::new();
    for (name, neurons) in &spec.layers {
        let acts = layer_activations(&mut rng, &p, *neurons, &spec.epochs);
        let mut checkpoints = Vec::new();
        for (&epoch, q) in spec.epochs.iter().zip(&acts) {
            let rel = PathBuf::from(format!("activations/{name}_e{epoch}.cmtx"));
            write_matrix(q, &dir.join(&rel))?;
            checkpoints.push(CheckpointEntry { epoch, activations: rel });
        }
        layers.push(LayerEntry {
            name: name.clone(),
            neurons: *neurons,
            checkpoints,
        });
    }

    let manifest = RunManifest {
        run_id: spec.run_id.clone(),
        probe_count: spec.probes,
        concepts: ConceptFiles {
            words: "concepts.tsv".into(),
            embeddings: "concepts.cmtx".into(),
            probe_sims: Some("probe_sims.cmtx".into()),
            probe_labels: Some("probe_labels.cmtx".into()),
        },
        anchors: Some(AnchorFiles {
            words: "anchors.tsv".into(),
            embeddings: "anchors.cmtx".into(),
        }),
        probe_images: Some((0..spec.probes).map(|k| format!("probe_{k:04}.jpg")).collect()),
        encoder: Some("synthetic".into()),
        skipped_images: Vec::new(),
        layers,
    };
    let path = dir.join("manifest.json");
    write_text(&path, &manifest.to_json())?;
    Ok(path)
}

/// In-memory activations and concept space of a given scale.
pub struct ScaleInputs {
    pub activations: MatrixF32,
    pub space: ConceptSpace,
    pub anchors: crate::store::AnchorSet,
}

/// Random inputs of the given shape: `probes × neurons` activations and a
/// `concepts`-word space of dimension `dim` with probe similarities.
pub fn scale_inputs(probes: usize, neurons: usize, concepts: usize, dim: usize, seed: u64) -> Result<ScaleInputs> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emb = random_unit_rows(&mut rng, concepts, dim);
    let p_data = (0..probes * concepts)
        .map(|_| rng.random_range(0.1f32..0.35))
        .collect();
    let p = MatrixF32::from_vec(probes, concepts, p_data)?;
    let q_data = (0..probes * neurons).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let activations = MatrixF32::from_vec(probes, neurons, q_data)?;
    let list = (0..concepts)
        .map(|i| Concept {
            word: format!("concept{i:04}"),
            category: Category::ALL[i % Category::ALL.len()],
        })
        .collect();
    let anchor_emb = random_unit_rows(&mut rng, 16, dim);
    let anchors = crate::store::AnchorSet::new((0..16).map(|i| format!("anchor{i:02}")).collect(), anchor_emb)?;
    Ok(ScaleInputs {
        activations,
        space: ConceptSpace::new(list, emb, Some(p), None)?,
        anchors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{validate_run, Run};

    #[test]
    fn reference_run_validates_and_is_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = write_reference_run(a.path(), &ReferenceSpec::default()).unwrap();
        let mb = write_reference_run(b.path(), &ReferenceSpec::default()).unwrap();
        let report = validate_run(&ma).unwrap();
        assert!(report.passed(), "{}", report.render());
        for rel in ["manifest.json", "concepts.cmtx", "activations/layer4_e10.cmtx"] {
            assert_eq!(
                std::fs::read(a.path().join(rel)).unwrap(),
                std::fs::read(b.path().join(rel)).unwrap()
            );
        }
        let run = Run::open(&mb).unwrap();
        assert_eq!(run.anchors().unwrap().len(), REFERENCE_ANCHORS.len());
    }

    #[test]
    fn labels_mark_top_tenth() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = probe_sims(&mut rng, 40, 3);
        let l = probe_labels(&p);
        for i in 0..3 {
            assert_eq!(l.column(i).iter().filter(|&&v| v == 1.0).count(), 4);
        }
    }
}

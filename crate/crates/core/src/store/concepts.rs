//! Concept and anchor vocabularies.
//!
//! Word lists are UTF-8 TSV files, one `word<TAB>category` entry per line;
//! the embeddings live in a sibling matrix file in the same row order.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::MatrixF32;
use crate::store::matrix_file::load_matrix;

/// Tolerance on the Euclidean norm of stored text embeddings.
pub const UNIT_NORM_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Material,
    Object,
    Scene,
    Texture,
    Color,
    Part,
    Other,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Material,
        Category::Object,
        Category::Scene,
        Category::Texture,
        Category::Color,
        Category::Part,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Material => "material",
            Category::Object => "object",
            Category::Scene => "scene",
            Category::Texture => "texture",
            Category::Color => "color",
            Category::Part => "part",
            Category::Other => "other",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub word: String,
    pub category: Category,
}

/// One parsed TSV line: the category column is optional for anchor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordEntry {
    pub word: String,
    pub category: Option<Category>,
}

pub fn parse_word_list(path: &Path, text: &str) -> Result<Vec<WordEntry>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.into(),
            line: line_no,
            message,
        };
        let mut fields = line.split('\t');
        let word = fields.next().unwrap_or_default();
        if word.trim().is_empty() {
            return Err(parse_err("empty word".into()));
        }
        let category = match fields.next() {
            Some(c) => Some(c.parse::<Category>().map_err(parse_err)?),
            None => None,
        };
        if fields.next().is_some() {
            return Err(parse_err("expected at most two tab-separated fields".into()));
        }
        if !seen.insert(word.to_string()) {
            return Err(parse_err(format!("duplicate concept {word:?}")));
        }
        out.push(WordEntry {
            word: word.to_string(),
            category,
        });
    }
    Ok(out)
}

pub fn read_word_list(path: &Path) -> Result<Vec<WordEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_word_list(path, &text)
}

/// The sibling embedding file for a word list: same path, `.cmtx` extension.
pub fn sibling_matrix_path(words: &Path) -> PathBuf {
    words.with_extension("cmtx")
}

/// Returns the first row whose norm is off by more than [`UNIT_NORM_TOL`].
pub fn first_non_unit_row(m: &MatrixF32) -> Option<(usize, f64)> {
    m.row_iter().enumerate().find_map(|(i, row)| {
        let norm = row
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt();
        ((norm - 1.0).abs() > UNIT_NORM_TOL).then_some((i, norm))
    })
}

fn check_unit_rows(what: &str, m: &MatrixF32) -> Result<()> {
    match first_non_unit_row(m) {
        Some((i, norm)) => Err(Error::InvalidInput(format!(
            "{what} row {i} has norm {norm}, expected 1"
        ))),
        None => Ok(()),
    }
}

/// Concept vocabulary with text embeddings and the probe-side matrices the
/// detectors consume.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptSpace {
    concepts: Vec<Concept>,
    embeddings: MatrixF32,
    probe_sims: Option<MatrixF32>,
    probe_labels: Option<MatrixF32>,
}

impl ConceptSpace {
    pub fn new(
        concepts: Vec<Concept>,
        embeddings: MatrixF32,
        probe_sims: Option<MatrixF32>,
        probe_labels: Option<MatrixF32>,
    ) -> Result<Self> {
        if concepts.is_empty() {
            return Err(Error::InvalidInput("concept space is empty".into()));
        }
        let mut seen = HashSet::new();
        if let Some(c) = concepts.iter().find(|c| !seen.insert(c.word.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate concept {:?}", c.word)));
        }
        if embeddings.rows() != concepts.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} concepts but {} embedding rows",
                concepts.len(),
                embeddings.rows()
            )));
        }
        check_unit_rows("concept embedding", &embeddings)?;
        for (name, m) in [("probe similarity", &probe_sims), ("probe label", &probe_labels)] {
            if let Some(m) = m {
                if m.cols() != concepts.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "{name} matrix has {} columns for {} concepts",
                        m.cols(),
                        concepts.len()
                    )));
                }
            }
        }
        if let (Some(p), Some(c)) = (&probe_sims, &probe_labels) {
            if p.rows() != c.rows() {
                return Err(Error::DimensionMismatch(format!(
                    "probe similarity rows {} != probe label rows {}",
                    p.rows(),
                    c.rows()
                )));
            }
        }
        if let Some(c) = &probe_labels {
            if let Some(i) = c.as_slice().iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidInput(format!(
                    "probe labels must be binary; found {} at ({},{})",
                    c.as_slice()[i],
                    i / c.cols(),
                    i % c.cols()
                )));
            }
        }
        Ok(Self {
            concepts,
            embeddings,
            probe_sims,
            probe_labels,
        })
    }

    /// Loads a word list plus its embedding matrix and optional probe matrices.
    pub fn load(
        words: &Path,
        embeddings: &Path,
        probe_sims: Option<&Path>,
        probe_labels: Option<&Path>,
    ) -> Result<Self> {
        let entries = read_word_list(words)?;
        let concepts = entries
            .into_iter()
            .map(|e| Concept {
                category: e.category.unwrap_or(Category::Other),
                word: e.word,
            })
            .collect();
        let embeddings = load_matrix(embeddings)?;
        let probe_sims = probe_sims.map(load_matrix).transpose()?;
        let probe_labels = probe_labels.map(load_matrix).transpose()?;
        Self::new(concepts, embeddings, probe_sims, probe_labels)
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn concept(&self, i: usize) -> &Concept {
        &self.concepts[i]
    }

    pub fn embeddings(&self) -> &MatrixF32 {
        &self.embeddings
    }

    pub fn probe_sims(&self) -> Option<&MatrixF32> {
        self.probe_sims.as_ref()
    }

    pub fn probe_labels(&self) -> Option<&MatrixF32> {
        self.probe_labels.as_ref()
    }

    /// Reinterprets the concept vocabulary as an anchor set (anchors = concepts).
    pub fn as_anchor_set(&self) -> AnchorSet {
        AnchorSet {
            words: self.concepts.iter().map(|c| c.word.clone()).collect(),
            embeddings: self.embeddings.clone(),
        }
    }

    /// Stable 64-bit FNV-1a fingerprint over words and categories, used to
    /// check that two reports describe the same vocabulary.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for c in &self.concepts {
            for b in c.word.bytes().chain([0]).chain(c.category.as_str().bytes()).chain([0]) {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }
}

/// Reference words placed into the embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    words: Vec<String>,
    embeddings: MatrixF32,
}

impl AnchorSet {
    pub fn new(words: Vec<String>, embeddings: MatrixF32) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::InvalidInput("anchor set is empty".into()));
        }
        let mut seen = HashSet::new();
        if let Some(w) = words.iter().find(|w| !seen.insert(w.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate anchor {w:?}")));
        }
        if embeddings.rows() != words.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} anchors but {} embedding rows",
                words.len(),
                embeddings.rows()
            )));
        }
        check_unit_rows("anchor embedding", &embeddings)?;
        Ok(Self { words, embeddings })
    }

    /// Loads `words` and the embedding matrix at `embeddings` (or the sibling
    /// `.cmtx` file when `None`).
    pub fn load(words: &Path, embeddings: Option<&Path>) -> Result<Self> {
        let entries = read_word_list(words)?;
        let emb_path = embeddings
            .map(Path::to_path_buf)
            .unwrap_or_else(|| sibling_matrix_path(words));
        let embeddings = load_matrix(&emb_path)?;
        Self::new(entries.into_iter().map(|e| e.word).collect(), embeddings)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn embeddings(&self) -> &MatrixF32 {
        &self.embeddings
    }

    /// Precomputed embedding row for `word`.
    pub fn embed(&self, word: &str) -> Result<&[f32]> {
        self.words
            .iter()
            .position(|w| w == word)
            .map(|i| self.embeddings.row(i))
            .ok_or_else(|| Error::AnchorNotFound {
                word: word.to_string(),
                available: self.words.join(", "),
            })
    }
}

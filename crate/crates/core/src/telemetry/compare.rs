use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::Category;
use crate::telemetry::Snapshot;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRef {
    pub run_id: String,
    pub layer: String,
    pub epoch: u64,
    pub detector: String,
}

impl SnapshotRef {
    fn of(s: &Snapshot) -> Self {
        Self {
            run_id: s.run_id.clone(),
            layer: s.layer.clone(),
            epoch: s.epoch,
            detector: s.detector.kind.as_str().to_string(),
        }
    }
}

/// `delta = a - b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountDelta {
    pub a: usize,
    pub b: usize,
    pub delta: i64,
}

impl CountDelta {
    fn new(a: usize, b: usize) -> Self {
        Self {
            a,
            b,
            delta: a as i64 - b as i64,
        }
    }
}

/// `delta = a - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueDelta {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

impl ValueDelta {
    fn new(a: f64, b: f64) -> Self {
        Self { a, b, delta: a - b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDelta {
    pub concept: String,
    pub concept_index: usize,
    pub category: Category,
    pub count: CountDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunComparison {
    pub a: SnapshotRef,
    pub b: SnapshotRef,
    pub concept_space: String,
    pub interpretable: CountDelta,
    pub categories: BTreeMap<Category, CountDelta>,
    /// Concepts with at least one interpretable neuron in either run, by concept index.
    pub concepts: Vec<ConceptDelta>,
    pub d_anchor: ValueDelta,
    pub pairwise_diversity: ValueDelta,
}

fn concept_counts(s: &Snapshot) -> BTreeMap<usize, (String, Category, usize)> {
    let mut out = BTreeMap::new();
    for n in s.neurons.iter().filter(|n| n.interpretable) {
        out.entry(n.concept_index)
            .or_insert_with(|| (n.concept.clone(), n.category, 0))
            .2 += 1;
    }
    out
}

pub fn compare_runs(a: &Snapshot, b: &Snapshot) -> Result<RunComparison> {
    if a.concept_space != b.concept_space || a.concept_count != b.concept_count {
        return Err(Error::InvalidInput(format!(
            "mismatched concept spaces: {} ({} concepts) vs {} ({} concepts)",
            a.concept_space, a.concept_count, b.concept_space, b.concept_count
        )));
    }
    let ca = concept_counts(a);
    let cb = concept_counts(b);
    let mut indices: Vec<usize> = ca.keys().chain(cb.keys()).copied().collect();
    indices.sort_unstable();
    indices.dedup();
    let concepts = indices
        .into_iter()
        .map(|i| {
            let (word, cat, _) = ca.get(&i).or_else(|| cb.get(&i)).expect("index from either map");
            ConceptDelta {
                concept: word.clone(),
                concept_index: i,
                category: *cat,
                count: CountDelta::new(
                    ca.get(&i).map_or(0, |c| c.2),
                    cb.get(&i).map_or(0, |c| c.2),
                ),
            }
        })
        .collect();
    let categories = Category::ALL
        .iter()
        .map(|&c| {
            let get = |s: &Snapshot| s.category_counts.get(&c).copied().unwrap_or(0);
            (c, CountDelta::new(get(a), get(b)))
        })
        .collect();
    Ok(RunComparison {
        a: SnapshotRef::of(a),
        b: SnapshotRef::of(b),
        concept_space: a.concept_space.clone(),
        interpretable: CountDelta::new(a.interpretable_count, b.interpretable_count),
        categories,
        concepts,
        d_anchor: ValueDelta::new(a.d_anchor, b.d_anchor),
        pairwise_diversity: ValueDelta::new(a.pairwise_diversity, b.pairwise_diversity),
    })
}

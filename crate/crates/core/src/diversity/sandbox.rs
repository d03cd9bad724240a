//! Desk-scale surrogate of regularized training: a linear feature layer
//! `Q = X·W` feeding a linear softmax classifier, trained by full-batch
//! gradient descent on `cross_entropy + β·d_anchor`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diversity::grad::{anchor_distance_grad, weights_grad};
use crate::diversity::RegularizerConfig;
use crate::error::{Error, Result};
use crate::linalg::{matmul, matmul_tn};
use crate::matrix::{MatrixF32, MatrixF64};
use crate::store::{AnchorSet, Category, Concept, ConceptSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerParams {
    pub step_size: f64,
    pub steps: usize,
    /// Seeds the initial weights.
    pub seed: u64,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            step_size: 0.5,
            steps: 300,
            seed: 0,
        }
    }
}

/// Shape and seed of a generated sandbox problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandboxSpec {
    pub n_probe: usize,
    pub n_features: usize,
    pub n_neurons: usize,
    pub n_concepts: usize,
    pub n_classes: usize,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for SandboxSpec {
    fn default() -> Self {
        Self {
            n_probe: 64,
            n_features: 16,
            n_neurons: 8,
            n_concepts: 12,
            n_classes: 4,
            embedding_dim: 16,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SandboxProblem {
    /// Fixed inputs `X`, `N_probe × m`.
    pub features: MatrixF64,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub n_neurons: usize,
    /// Fixed probe-concept matrix `P`, `N_probe × |S|`.
    pub probe_sims: MatrixF64,
    pub concepts: ConceptSpace,
    pub anchors: AnchorSet,
    pub optimizer: OptimizerParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub task_loss: f64,
    pub d_anchor: f64,
    pub accuracy: f64,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> MatrixF64 {
    let data = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
        .collect();
    MatrixF64::from_vec(rows, cols, data).unwrap()
}

impl SandboxProblem {
    /// Generates a problem whose concept patterns lie in the span of the
    /// features, so neurons can in principle align with any concept. The
    /// anchor set equals the concept set.
    pub fn synthetic(spec: &SandboxSpec, optimizer: OptimizerParams) -> Result<Self> {
        if spec.n_probe < 2 || spec.n_features == 0 || spec.n_neurons == 0 {
            return Err(Error::InvalidInput("sandbox needs >= 2 probes, >= 1 feature and neuron".into()));
        }
        if spec.n_concepts == 0 || spec.n_classes < 2 || spec.embedding_dim == 0 {
            return Err(Error::InvalidInput("sandbox needs >= 1 concept, >= 2 classes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let features = gaussian(&mut rng, spec.n_probe, spec.n_features, 1.0);
        let teacher = gaussian(&mut rng, spec.n_features, spec.n_classes, 1.0);
        let scores = matmul(&features, &teacher);
        let labels = scores
            .row_iter()
            .map(|r| crate::detectors::argmax(r).unwrap().0)
            .collect();
        let mixing = gaussian(&mut rng, spec.n_features, spec.n_concepts, 1.0 / (spec.n_features as f64).sqrt());
        let probe_sims = matmul(&features, &mixing).map(|v| 0.3 * v.tanh());

        let mut emb = Vec::with_capacity(spec.n_concepts * spec.embedding_dim);
        for _ in 0..spec.n_concepts {
            let v: Vec<f64> = (0..spec.embedding_dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            emb.extend(v.iter().map(|x| (x / n) as f32));
        }
        let emb = MatrixF32::from_vec(spec.n_concepts, spec.embedding_dim, emb)?;
        let concepts = (0..spec.n_concepts)
            .map(|i| Concept {
                word: format!("concept{i}"),
                category: Category::ALL[i % Category::ALL.len()],
            })
            .collect();
        let concepts = ConceptSpace::new(concepts, emb, None, None)?;
        let anchors = concepts.as_anchor_set();
        Ok(Self {
            features,
            labels,
            n_classes: spec.n_classes,
            n_neurons: spec.n_neurons,
            probe_sims,
            concepts,
            anchors,
            optimizer,
        })
    }

    fn validate(&self) -> Result<()> {
        let n = self.features.rows();
        if self.labels.len() != n || self.probe_sims.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} probes but {} labels and {} probe-concept rows",
                self.labels.len(),
                self.probe_sims.rows()
            )));
        }
        if self.labels.iter().any(|&y| y >= self.n_classes) {
            return Err(Error::InvalidInput("label outside class range".into()));
        }
        if self
            .features
            .as_slice()
            .iter()
            .chain(self.probe_sims.as_slice())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput("sandbox inputs must be finite".into()));
        }
        if !(self.optimizer.step_size > 0.0 && self.optimizer.step_size.is_finite()) {
            return Err(Error::InvalidInput("step size must be positive".into()));
        }
        Ok(())
    }
}

struct Params {
    w: MatrixF64,
    head: MatrixF64,
    bias: Vec<f64>,
}

struct TaskEval {
    loss: f64,
    accuracy: f64,
    /// ∂loss/∂logits
    g_logits: MatrixF64,
}

fn task_eval(q: &MatrixF64, params: &Params, labels: &[usize]) -> TaskEval {
    let mut logits = matmul(q, &params.head);
    let n = q.rows() as f64;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row_mut(r);
        for (v, b) in row.iter_mut().zip(&params.bias) {
            *v += b;
        }
        if crate::detectors::argmax(row).unwrap().0 == y {
            correct += 1;
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        for (c, v) in row.iter_mut().enumerate() {
            let p = (*v - lse).exp();
            *v = (p - if c == y { 1.0 } else { 0.0 }) / n;
        }
    }
    TaskEval {
        loss: loss / n,
        accuracy: correct as f64 / n,
        g_logits: logits,
    }
}

fn run(prob: &SandboxProblem, reg: &RegularizerConfig, use_reg_grad: bool) -> Result<Vec<TraceStep>> {
    prob.validate()?;
    reg.validate()?;
    let opt = prob.optimizer;
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let m = prob.features.cols();
    let mut params = Params {
        w: gaussian(&mut rng, m, prob.n_neurons, 1.0 / (m as f64).sqrt()),
        head: gaussian(&mut rng, prob.n_neurons, prob.n_classes, 1.0 / (prob.n_neurons as f64).sqrt()),
        bias: vec![0.0; prob.n_classes],
    };
    let mut trace = Vec::with_capacity(opt.steps + 1);
    for step in 0..=opt.steps {
        let q = matmul(&prob.features, &params.w);
        let task = task_eval(&q, &params, &prob.labels);
        let (d_anchor, g_reg) =
            anchor_distance_grad(&q, &prob.probe_sims, &prob.concepts, &prob.anchors, reg)?;
        let objective = task.loss + reg.beta * d_anchor;
        if !objective.is_finite() {
            return Err(Error::Diverged { step });
        }
        trace.push(TraceStep {
            step,
            task_loss: task.loss,
            d_anchor,
            accuracy: task.accuracy,
        });
        if step == opt.steps {
            break;
        }

        let g_head = matmul_tn(&q, &task.g_logits);
        let g_bias: Vec<f64> = (0..prob.n_classes)
            .map(|c| (0..q.rows()).map(|r| task.g_logits.get(r, c)).sum())
            .collect();
        let mut g_q = matmul(&task.g_logits, &params.head.transpose());
        if use_reg_grad {
            for (g, r) in g_q.as_mut_slice().iter_mut().zip(g_reg.as_slice()) {
                *g += reg.beta * r;
            }
        }
        let g_w = weights_grad(&prob.features, &g_q);

        let lr = opt.step_size;
        for (p, g) in params.w.as_mut_slice().iter_mut().zip(g_w.as_slice()) {
            *p -= lr * g;
        }
        for (p, g) in params.head.as_mut_slice().iter_mut().zip(g_head.as_slice()) {
            *p -= lr * g;
        }
        for (p, g) in params.bias.iter_mut().zip(&g_bias) {
            *p -= lr * g;
        }
    }
    Ok(trace)
}

/// Trains on `L = L_task + β·d_anchor` and returns per-step metrics,
/// starting with the untrained model (`steps + 1` entries).
pub fn sandbox_train(prob: &SandboxProblem, reg: &RegularizerConfig) -> Result<Vec<TraceStep>> {
    run(prob, reg, true)
}

/// Same loop with the regularizer gradient dropped; the regularizer value is
/// still reported.
pub fn sandbox_train_without_regularizer_gradient(
    prob: &SandboxProblem,
    reg: &RegularizerConfig,
) -> Result<Vec<TraceStep>> {
    run(prob, reg, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diversity::anchor_distance;
    use crate::embedding::{neuron_embeddings, EmbeddingConfig};

    fn problem(steps: usize) -> SandboxProblem {
        SandboxProblem::synthetic(
            &SandboxSpec::default(),
            OptimizerParams {
                steps,
                ..OptimizerParams::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_steps_reports_initial_state() {
        let prob = problem(0);
        let reg = RegularizerConfig::default();
        let trace = sandbox_train(&prob, &reg).unwrap();
        assert_eq!(trace.len(), 1);

        let mut rng = ChaCha8Rng::seed_from_u64(prob.optimizer.seed);
        let m = prob.features.cols();
        let w = gaussian(&mut rng, m, prob.n_neurons, 1.0 / (m as f64).sqrt());
        let q = matmul(&prob.features, &w);
        let sims = crate::detectors::cos_cubed_sim(&q, &prob.probe_sims).unwrap();
        let set = neuron_embeddings(&sims, &prob.concepts, &EmbeddingConfig::new(reg.temperature).unwrap()).unwrap();
        let direct = anchor_distance(&set, &prob.anchors).unwrap().d_anchor;
        assert_eq!(trace[0].d_anchor, direct);
    }

    #[test]
    fn beta_zero_equals_dropped_gradient() {
        let prob = problem(25);
        let reg = RegularizerConfig {
            beta: 0.0,
            ..RegularizerConfig::default()
        };
        let a = sandbox_train(&prob, &reg).unwrap();
        let b = sandbox_train_without_regularizer_gradient(&prob, &reg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic() {
        let prob = problem(10);
        let reg = RegularizerConfig::default();
        assert_eq!(sandbox_train(&prob, &reg).unwrap(), sandbox_train(&prob, &reg).unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let mut prob = problem(50);
        prob.optimizer.step_size = 1e200;
        let err = sandbox_train(&prob, &RegularizerConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }
}

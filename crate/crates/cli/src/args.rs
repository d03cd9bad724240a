use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use concept_monitor::detectors::{DetectorConfig, DetectorKind};
use concept_monitor::embedding::{EmbeddingConfig, DEFAULT_TEMPERATURE};
use concept_monitor::telemetry::{SnapshotOptions, DEFAULT_SETTLE_DELTA, DEFAULT_TOP_K};
use concept_monitor::Result;

#[derive(Debug, Parser)]
#[command(
    name = "concept-monitor",
    version,
    about = "Offline concept telemetry for neural-network training checkpoints"
)]
pub struct Cli {
    /// Worker threads; overrides CONCEPT_MONITOR_THREADS. Defaults to all cores.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a run manifest and every file it references.
    Validate {
        /// Run manifest (JSON).
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Concept assignments, embedding layout and diversity of one checkpoint.
    Snapshot(SnapshotArgs),
    /// Follow neurons across every checkpoint of a layer.
    Track(TrackArgs),
    /// Diff the snapshots of two runs (or two epochs of one run).
    Compare(CompareArgs),
    /// Anchor distance and pairwise diversity at every checkpoint of a layer.
    Diversity(DiversityArgs),
    /// Anchor distance of one checkpoint across softmax temperatures.
    Sweep(SweepArgs),
    /// Train the synthetic sandbox with and without the diversity regularizer.
    Sandbox(SandboxArgs),
}

fn parse_detector(s: &str) -> std::result::Result<DetectorKind, String> {
    s.parse()
}

#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    /// Concept detector: cos3, soft_wpmi or iou.
    #[arg(long, default_value = "cos3", value_parser = parse_detector)]
    pub detector: DetectorKind,
    /// Interpretability threshold; defaults to 0.1 (cos3, soft_wpmi) or 0.04 (iou).
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// soft-WPMI concept-prior weight.
    #[arg(long, default_value_t = 1.0)]
    pub wpmi_lambda: f64,
    /// soft-WPMI softmax sharpness.
    #[arg(long, default_value_t = 0.05)]
    pub wpmi_gamma: f64,
    /// soft-WPMI top-activation count; defaults to min(100, probes / 10).
    #[arg(long)]
    pub wpmi_top_k: Option<usize>,
    /// soft-WPMI inclusion steepness.
    #[arg(long, default_value_t = 10.0)]
    pub wpmi_steepness: f64,
    /// IoU fraction of probes counted as activated.
    #[arg(long, default_value_t = 0.05)]
    pub iou_quantile: f64,
}

impl DetectorArgs {
    pub fn config(&self) -> Result<DetectorConfig> {
        let mut cfg = DetectorConfig::new(self.detector);
        if let Some(tau) = self.tau {
            cfg.tau = tau;
        }
        cfg.soft_wpmi.lambda = self.wpmi_lambda;
        cfg.soft_wpmi.gamma = self.wpmi_gamma;
        cfg.soft_wpmi.top_k = self.wpmi_top_k;
        cfg.soft_wpmi.steepness = self.wpmi_steepness;
        cfg.iou.quantile = self.iou_quantile;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Run manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Layer name as listed in the manifest.
    #[arg(long)]
    pub layer: String,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Softmax temperature of the neuron embedding.
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    pub temperature: f64,
    /// Anchor word list (TSV); embeddings are read from the sibling .cmtx file.
    /// Defaults to the manifest's anchors, then to the concept set.
    #[arg(long)]
    pub anchors: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

impl RunArgs {
    pub fn options(&self, top_k: usize) -> Result<SnapshotOptions> {
        Ok(SnapshotOptions {
            detector: self.detector.config()?,
            embedding: EmbeddingConfig::new(self.temperature)?,
            top_k,
        })
    }
}

#[derive(Debug, Args)]
pub struct SnapshotArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Checkpoint epoch.
    #[arg(long)]
    pub epoch: u64,
    /// Top-activating probes reported per neuron.
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Neurons highlighted in the embedding plot, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub highlight: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Neuron indices, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub neurons: Vec<usize>,
    /// Settlement radius in embedding space.
    #[arg(long, default_value_t = DEFAULT_SETTLE_DELTA)]
    pub settle_delta: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Checkpoint epoch.
    #[arg(long)]
    pub epoch: u64,
    /// Manifest of the second run; defaults to --manifest.
    #[arg(long)]
    pub other_manifest: Option<PathBuf>,
    /// Epoch of the second run; defaults to --epoch.
    #[arg(long)]
    pub other_epoch: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DiversityArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

pub const DEFAULT_SWEEP: [f64; 11] = [1e-4, 1e-3, 3e-3, 0.01, 0.03, 0.1, 0.3, 1.0, 10.0, 1e3, 1e8];

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Checkpoint epoch.
    #[arg(long)]
    pub epoch: u64,
    /// Temperatures, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP)]
    pub temperatures: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SandboxArgs {
    /// Regularizer weight of the treated arm; the baseline arm uses 0.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    pub temperature: f64,
    #[arg(long, default_value_t = 300)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub step_size: f64,
    /// Seed of the generated problem.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

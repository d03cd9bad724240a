use std::path::{Path, PathBuf};
use std::process::ExitCode;

use concept_monitor::detectors::compute_similarity;
use concept_monitor::diversity::{
    sandbox_train, temperature_sweep, OptimizerParams, RegularizerConfig, SandboxProblem, SandboxSpec,
};
use concept_monitor::report::{
    curve_svg, diversity_csv, emit_comparison_json, emit_snapshot_reports, emit_text, emit_track_reports,
    sandbox_trace_csv, sweep_csv, DiversityRow, SandboxArm, Series,
};
use concept_monitor::store::{validate_run, AnchorSet, Run};
use concept_monitor::telemetry::{build_snapshot, compare_runs, track_neurons, DEFAULT_TOP_K};
use concept_monitor::{Error, Result};

use crate::args::{
    Command, CompareArgs, DiversityArgs, RunArgs, SandboxArgs, SnapshotArgs, SweepArgs, TrackArgs,
};

pub fn run(command: &Command) -> Result<ExitCode> {
    match command {
        Command::Validate { manifest } => validate(manifest),
        Command::Snapshot(a) => done(snapshot(a)?),
        Command::Track(a) => done(track(a)?),
        Command::Compare(a) => done(vec![compare(a)?]),
        Command::Diversity(a) => done(diversity(a)?),
        Command::Sweep(a) => done(sweep(a)?),
        Command::Sandbox(a) => done(sandbox(a)?),
    }
}

fn done(files: Vec<PathBuf>) -> Result<ExitCode> {
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(manifest: &Path) -> Result<ExitCode> {
    let report = validate_run(manifest)?;
    print!("{}", report.render());
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn open(args: &RunArgs) -> Result<(Run, Option<AnchorSet>)> {
    let run = Run::open(&args.manifest)?;
    run.layer(&args.layer)?;
    let anchors = args.anchors.as_deref().map(|p| AnchorSet::load(p, None)).transpose()?;
    Ok((run, anchors))
}

fn snapshot(a: &SnapshotArgs) -> Result<Vec<PathBuf>> {
    let (run, anchors) = open(&a.run)?;
    let opts = a.run.options(a.top_k)?;
    let s = build_snapshot(&run, &a.run.layer, a.epoch, &opts, anchors.as_ref())?;
    if let Some(&bad) = a.highlight.iter().find(|&&n| n >= s.neuron_count) {
        return Err(Error::InvalidInput(format!(
            "invalid neuron index {bad}: layer {} has {} neurons",
            s.layer, s.neuron_count
        )));
    }
    emit_snapshot_reports(&s, &a.run.out, &a.highlight)
}

fn track(a: &TrackArgs) -> Result<Vec<PathBuf>> {
    let (run, anchors) = open(&a.run)?;
    let opts = a.run.options(DEFAULT_TOP_K)?;
    let report = track_neurons(&run, &a.run.layer, &a.neurons, &opts, anchors.as_ref(), a.settle_delta)?;
    for t in &report.trajectories {
        match t.settle_epoch {
            Some(e) => println!("neuron {}: settled at epoch {e}", t.neuron),
            None => println!("neuron {}: not settled", t.neuron),
        }
    }
    emit_track_reports(&report, &a.run.out)
}

fn compare(a: &CompareArgs) -> Result<PathBuf> {
    let (run, anchors) = open(&a.run)?;
    let opts = a.run.options(DEFAULT_TOP_K)?;
    let snap_a = build_snapshot(&run, &a.run.layer, a.epoch, &opts, anchors.as_ref())?;
    let other_epoch = a.other_epoch.unwrap_or(a.epoch);
    let snap_b = match &a.other_manifest {
        Some(path) => {
            let other = Run::open(path)?;
            build_snapshot(&other, &a.run.layer, other_epoch, &opts, anchors.as_ref())?
        }
        None => build_snapshot(&run, &a.run.layer, other_epoch, &opts, anchors.as_ref())?,
    };
    let c = compare_runs(&snap_a, &snap_b)?;
    println!(
        "interpretable: {} vs {} ({:+}); d_anchor delta {:+.6}",
        c.interpretable.a, c.interpretable.b, c.interpretable.delta, c.d_anchor.delta
    );
    emit_comparison_json(&c, &a.run.out)
}

fn diversity(a: &DiversityArgs) -> Result<Vec<PathBuf>> {
    let (run, anchors) = open(&a.run)?;
    let opts = a.run.options(1)?;
    let rows = run
        .layer(&a.run.layer)?
        .epochs()
        .into_iter()
        .map(|epoch| {
            let s = build_snapshot(&run, &a.run.layer, epoch, &opts, anchors.as_ref())?;
            Ok(DiversityRow {
                epoch,
                d_anchor: s.d_anchor,
                pairwise_diversity: s.pairwise_diversity,
                interpretable_count: s.interpretable_count,
                interpretable_percentage: s.interpretable_percentage,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let series = [
        Series {
            name: "d_anchor".into(),
            points: rows.iter().map(|r| (r.epoch as f64, r.d_anchor)).collect(),
        },
        Series {
            name: "pairwise diversity".into(),
            points: rows.iter().map(|r| (r.epoch as f64, r.pairwise_diversity)).collect(),
        },
    ];
    let title = format!("{}: concept diversity by epoch", a.run.layer);
    Ok(vec![
        emit_text(&a.run.out, "diversity.csv", &diversity_csv(&rows))?,
        emit_text(&a.run.out, "diversity.svg", &curve_svg(&title, "epoch", "distance", &series, false))?,
    ])
}

fn sweep(a: &SweepArgs) -> Result<Vec<PathBuf>> {
    let (run, anchors) = open(&a.run)?;
    let opts = a.run.options(1)?;
    let q = run.activations(&a.run.layer, a.epoch)?;
    let space = run.concepts();
    let sims = compute_similarity(&q, space, &opts.detector)?;
    let fallback;
    let anchor_set = match anchors.as_ref().or(run.anchors()) {
        Some(set) => set,
        None => {
            fallback = space.as_anchor_set();
            &fallback
        }
    };
    let points = temperature_sweep(&sims, space, anchor_set, &a.temperatures)?;
    let series = [Series {
        name: "d_anchor".into(),
        points: points.clone(),
    }];
    let title = format!("{} epoch {}: d_anchor vs temperature", a.run.layer, a.epoch);
    Ok(vec![
        emit_text(&a.run.out, "sweep.csv", &sweep_csv(&points))?,
        emit_text(&a.run.out, "sweep.svg", &curve_svg(&title, "temperature", "d_anchor", &series, true))?,
    ])
}

fn sandbox(a: &SandboxArgs) -> Result<Vec<PathBuf>> {
    let prob = SandboxProblem::synthetic(
        &SandboxSpec {
            seed: a.seed,
            ..SandboxSpec::default()
        },
        OptimizerParams {
            step_size: a.step_size,
            steps: a.steps,
            ..OptimizerParams::default()
        },
    )?;
    let treated = sandbox_train(
        &prob,
        &RegularizerConfig {
            beta: a.beta,
            temperature: a.temperature,
        },
    )?;
    let baseline = sandbox_train(
        &prob,
        &RegularizerConfig {
            beta: 0.0,
            temperature: a.temperature,
        },
    )?;
    let (t, b) = (treated.last().unwrap(), baseline.last().unwrap());
    println!(
        "final d_anchor {:.6} (beta={}) vs {:.6} (beta=0); task loss {:.6} vs {:.6}",
        t.d_anchor, a.beta, b.d_anchor, t.task_loss, b.task_loss
    );
    let arms = [
        SandboxArm {
            name: "regularized",
            beta: a.beta,
            trace: &treated,
        },
        SandboxArm {
            name: "baseline",
            beta: 0.0,
            trace: &baseline,
        },
    ];
    let curve = |f: fn(&concept_monitor::diversity::TraceStep) -> f64| {
        arms.iter()
            .map(|arm| Series {
                name: format!("{} (beta={})", arm.name, arm.beta),
                points: arm.trace.iter().map(|s| (s.step as f64, f(s))).collect(),
            })
            .collect::<Vec<_>>()
    };
    Ok(vec![
        emit_text(&a.out, "sandbox_trace.csv", &sandbox_trace_csv(&arms))?,
        emit_text(
            &a.out,
            "sandbox_d_anchor.svg",
            &curve_svg("sandbox: d_anchor during training", "step", "d_anchor", &curve(|s| s.d_anchor), false),
        )?,
        emit_text(
            &a.out,
            "sandbox_loss.svg",
            &curve_svg("sandbox: task loss during training", "step", "cross-entropy", &curve(|s| s.task_loss), false),
        )?,
    ])
}

use std::fmt::Write;

use crate::diversity::TraceStep;
use crate::report::format_float;
use crate::store::Category;
use crate::telemetry::Snapshot;

/// One row per category in fixed order, then a `total` row with the
/// interpretable count. Percentages are of all neurons in the layer.
pub fn categories_csv(s: &Snapshot) -> String {
    let mut out = String::from("layer,epoch,category,count,percentage\n");
    for c in Category::ALL {
        let count = s.category_counts.get(&c).copied().unwrap_or(0);
        let pct = s.category_percentages.get(&c).copied().unwrap_or(0.0);
        writeln!(out, "{},{},{},{},{}", s.layer, s.epoch, c, count, format_float(pct)).unwrap();
    }
    writeln!(
        out,
        "{},{},total,{},{}",
        s.layer,
        s.epoch,
        s.interpretable_count,
        format_float(s.interpretable_percentage)
    )
    .unwrap();
    out
}

pub fn sweep_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("temperature,d_anchor\n");
    for (t, d) in points {
        writeln!(out, "{},{}", format_float(*t), format_float(*d)).unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityRow {
    pub epoch: u64,
    pub d_anchor: f64,
    pub pairwise_diversity: f64,
    pub interpretable_count: usize,
    pub interpretable_percentage: f64,
}

pub fn diversity_csv(rows: &[DiversityRow]) -> String {
    let mut out = String::from("epoch,d_anchor,pairwise_diversity,interpretable_count,interpretable_percentage\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch,
            format_float(r.d_anchor),
            format_float(r.pairwise_diversity),
            r.interpretable_count,
            format_float(r.interpretable_percentage)
        )
        .unwrap();
    }
    out
}

/// A named training trace, e.g. the regularized arm and its β=0 baseline.
pub struct SandboxArm<'a> {
    pub name: &'a str,
    pub beta: f64,
    pub trace: &'a [TraceStep],
}

pub fn sandbox_trace_csv(arms: &[SandboxArm<'_>]) -> String {
    let mut out = String::from("arm,beta,step,task_loss,d_anchor,accuracy\n");
    for arm in arms {
        for t in arm.trace {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                arm.name,
                format_float(arm.beta),
                t.step,
                format_float(t.task_loss),
                format_float(t.d_anchor),
                format_float(t.accuracy)
            )
            .unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_rows() {
        assert_eq!(
            sweep_csv(&[(0.01, 0.25), (1e8, 1.0 / 3.0)]),
            "temperature,d_anchor\n0.01,0.25\n100000000.0,0.333333333\n"
        );
    }

    #[test]
    fn trace_rows() {
        let trace = [TraceStep {
            step: 0,
            task_loss: 1.5,
            d_anchor: 0.5,
            accuracy: 0.25,
        }];
        let text = sandbox_trace_csv(&[SandboxArm {
            name: "baseline",
            beta: 0.0,
            trace: &trace,
        }]);
        assert_eq!(text.lines().nth(1), Some("baseline,0.0,0,1.5,0.5,0.25"));
    }
}

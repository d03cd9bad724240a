use std::fmt::Write;

use crate::store::Category;
use crate::telemetry::{AnchorRecord, Snapshot, TrackReport};

const NEURON_GRAY: &str = "#9e9e9e";
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Two-decimal pixel coordinate; never renders `-0.00`.
fn px(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Compact tick label.
fn tick(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.into()
        }
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Maps data coordinates into a pixel rectangle, y pointing up.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return (lo - 1.0, lo + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

impl Frame {
    fn fit(points: &[(f64, f64)], left: f64, top: f64, width: f64, height: f64) -> Self {
        let (x, y) = if points.is_empty() {
            ((-1.0, 1.0), (-1.0, 1.0))
        } else {
            let (xl, xh) = bounds(points.iter().map(|p| p.0));
            let (yl, yh) = bounds(points.iter().map(|p| p.1));
            (padded(xl, xh), padded(yl, yh))
        };
        Self {
            x,
            y,
            left,
            top,
            width,
            height,
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width,
            self.top + (self.y.1 - y) / (self.y.1 - self.y.0) * self.height,
        )
    }
}

fn open(out: &mut String, w: u32, h: u32, title: &str) {
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">"
    )
    .unwrap();
    writeln!(out, "<title>{}</title>", escape(title)).unwrap();
    writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>").unwrap();
    writeln!(out, "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>", w / 2, escape(title)).unwrap();
}

fn star_points(cx: f64, cy: f64, outer: f64) -> String {
    let inner = outer * 0.45;
    (0..10)
        .map(|i| {
            let r = if i % 2 == 0 { outer } else { inner };
            let angle = std::f64::consts::PI * (i as f64 / 5.0 - 0.5);
            format!("{},{}", px(cx + r * angle.cos()), px(cy + r * angle.sin()))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn draw_anchors(out: &mut String, frame: &Frame, anchors: &[AnchorRecord]) {
    out.push_str("<g class=\"anchors\">\n");
    for a in anchors {
        let (cx, cy) = frame.map(a.x, a.y);
        writeln!(
            out,
            "<polygon class=\"anchor\" points=\"{}\" fill=\"#ffd700\" stroke=\"#333\" stroke-width=\"1\"><title>{}</title></polygon>",
            star_points(cx, cy, 9.0),
            escape(&a.word)
        )
        .unwrap();
        writeln!(out, "<text class=\"anchor-label\" x=\"{}\" y=\"{}\">{}</text>", px(cx + 10.0), px(cy - 8.0), escape(&a.word)).unwrap();
    }
    out.push_str("</g>\n");
}

/// Scatter of every neuron (gray; `tracked` neurons colored) with anchors
/// drawn as stars.
pub fn embedding_svg(s: &Snapshot, tracked: &[usize]) -> String {
    let mut pts: Vec<(f64, f64)> = s.neurons.iter().map(|n| (n.x, n.y)).collect();
    pts.extend(s.anchors.iter().map(|a| (a.x, a.y)));
    let frame = Frame::fit(&pts, 40.0, 40.0, 560.0, 560.0);
    let mut out = String::new();
    open(
        &mut out,
        640,
        640,
        &format!("{} {} epoch {}: neuron embeddings ({})", s.run_id, s.layer, s.epoch, s.detector.kind.as_str()),
    );
    writeln!(out, "<rect x=\"40\" y=\"40\" width=\"560\" height=\"560\" fill=\"none\" stroke=\"#ccc\"/>").unwrap();
    out.push_str("<g class=\"neurons\">\n");
    let color_of = |n: usize| tracked.iter().position(|&t| t == n).map(|i| PALETTE[i % PALETTE.len()]);
    // tracked neurons last so they sit on top
    let order = s
        .neurons
        .iter()
        .filter(|n| color_of(n.neuron).is_none())
        .chain(s.neurons.iter().filter(|n| color_of(n.neuron).is_some()));
    for n in order {
        let (cx, cy) = frame.map(n.x, n.y);
        let (class, fill, r) = match color_of(n.neuron) {
            Some(c) => ("neuron tracked", c, 6.0),
            None => ("neuron", NEURON_GRAY, 4.0),
        };
        writeln!(
            out,
            "<circle class=\"{class}\" cx=\"{}\" cy=\"{}\" r=\"{r}\" fill=\"{fill}\" fill-opacity=\"0.8\"><title>#{} {} ({})</title></circle>",
            px(cx),
            px(cy),
            n.neuron,
            escape(&n.concept),
            tick(n.similarity)
        )
        .unwrap();
    }
    out.push_str("</g>\n");
    draw_anchors(&mut out, &frame, &s.anchors);
    out.push_str("</svg>\n");
    out
}

/// Paths of tracked neurons through the shared projection, one marker per
/// checkpoint, with anchors as stars.
pub fn trajectory_svg(r: &TrackReport) -> String {
    let mut pts: Vec<(f64, f64)> = r
        .trajectories
        .iter()
        .flat_map(|t| t.points.iter().map(|p| (p.x, p.y)))
        .collect();
    pts.extend(r.anchors.iter().map(|a| (a.x, a.y)));
    let frame = Frame::fit(&pts, 40.0, 40.0, 560.0, 560.0);
    let mut out = String::new();
    open(&mut out, 640, 640, &format!("{} {}: neuron trajectories", r.run_id, r.layer));
    writeln!(out, "<rect x=\"40\" y=\"40\" width=\"560\" height=\"560\" fill=\"none\" stroke=\"#ccc\"/>").unwrap();
    for (i, t) in r.trajectories.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mapped: Vec<(f64, f64)> = t.points.iter().map(|p| frame.map(p.x, p.y)).collect();
        writeln!(out, "<g class=\"trajectory\" data-neuron=\"{}\">", t.neuron).unwrap();
        let path: Vec<String> = mapped.iter().map(|(x, y)| format!("{},{}", px(*x), px(*y))).collect();
        writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>", path.join(" ")).unwrap();
        for (p, (cx, cy)) in t.points.iter().zip(&mapped) {
            writeln!(
                out,
                "<circle class=\"checkpoint\" cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{color}\"><title>#{} epoch {}: {}</title></circle>",
                px(*cx),
                px(*cy),
                t.neuron,
                p.epoch,
                escape(&p.concept)
            )
            .unwrap();
        }
        if let Some((x, y)) = mapped.last() {
            writeln!(out, "<text x=\"{}\" y=\"{}\" fill=\"{color}\">#{}</text>", px(x + 6.0), px(y + 4.0), t.neuron).unwrap();
        }
        out.push_str("</g>\n");
    }
    draw_anchors(&mut out, &frame, &r.anchors);
    out.push_str("</svg>\n");
    out
}

/// Percentage of the layer's neurons interpretable per category.
pub fn bars_svg(s: &Snapshot) -> String {
    let (left, top, width, height) = (50.0, 40.0, 560.0, 300.0);
    let max_pct = Category::ALL
        .iter()
        .map(|c| s.category_percentages.get(c).copied().unwrap_or(0.0))
        .fold(0.0f64, f64::max);
    let y_max = ((max_pct / 10.0).ceil() * 10.0).max(10.0);
    let mut out = String::new();
    open(
        &mut out,
        640,
        400,
        &format!("{} {} epoch {}: interpretable neurons by category (%)", s.run_id, s.layer, s.epoch),
    );
    writeln!(
        out,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\"/>",
        top + height,
        left + width,
        top + height
    )
    .unwrap();
    writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>", left - 4.0, top + 4.0, tick(y_max)).unwrap();
    writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">0</text>", left - 4.0, top + height).unwrap();
    let slot = width / Category::ALL.len() as f64;
    for (i, c) in Category::ALL.iter().enumerate() {
        let pct = s.category_percentages.get(c).copied().unwrap_or(0.0);
        let count = s.category_counts.get(c).copied().unwrap_or(0);
        let h = pct / y_max * height;
        let x = left + slot * i as f64 + slot * 0.15;
        writeln!(
            out,
            "<rect class=\"bar\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"><title>{c}: {count} ({}%)</title></rect>",
            px(x),
            px(top + height - h),
            px(slot * 0.7),
            px(h),
            PALETTE[i % PALETTE.len()],
            tick(pct)
        )
        .unwrap();
        let cx = left + slot * (i as f64 + 0.5);
        writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{c}</text>", px(cx), px(top + height + 16.0)).unwrap();
        writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", px(cx), px(top + height - h - 4.0), tick(pct)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Line plot of one or more series; `log_x` plots x on a log10 axis and
/// requires positive x values.
pub fn curve_svg(title: &str, x_label: &str, y_label: &str, series: &[Series], log_x: bool) -> String {
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|&(x, y)| (tx(x), y)))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let frame = Frame::fit(&all, 70.0, 40.0, 520.0, 300.0);
    let mut out = String::new();
    open(&mut out, 640, 400, title);
    writeln!(out, "<rect x=\"70\" y=\"40\" width=\"520\" height=\"300\" fill=\"none\" stroke=\"#333\"/>").unwrap();
    let untx = |x: f64| if log_x { 10f64.powf(x) } else { x };
    writeln!(out, "<text x=\"70\" y=\"356\" text-anchor=\"start\">{}</text>", tick(untx(frame.x.0))).unwrap();
    writeln!(out, "<text x=\"590\" y=\"356\" text-anchor=\"end\">{}</text>", tick(untx(frame.x.1))).unwrap();
    writeln!(out, "<text x=\"66\" y=\"344\" text-anchor=\"end\">{}</text>", tick(frame.y.0)).unwrap();
    writeln!(out, "<text x=\"66\" y=\"48\" text-anchor=\"end\">{}</text>", tick(frame.y.1)).unwrap();
    let x_axis = if log_x { format!("{x_label} (log scale)") } else { x_label.to_string() };
    writeln!(out, "<text x=\"330\" y=\"376\" text-anchor=\"middle\">{}</text>", escape(&x_axis)).unwrap();
    writeln!(
        out,
        "<text x=\"18\" y=\"190\" text-anchor=\"middle\" transform=\"rotate(-90 18 190)\">{}</text>",
        escape(y_label)
    )
    .unwrap();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mapped: Vec<(f64, f64)> = s
            .points
            .iter()
            .map(|&(x, y)| (tx(x), y))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| frame.map(x, y))
            .collect();
        writeln!(out, "<g class=\"series\" data-name=\"{}\">", escape(&s.name)).unwrap();
        let path: Vec<String> = mapped.iter().map(|(x, y)| format!("{},{}", px(*x), px(*y))).collect();
        writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>", path.join(" ")).unwrap();
        if mapped.len() <= 50 {
            for (x, y) in &mapped {
                writeln!(out, "<circle class=\"point\" cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>", px(*x), px(*y)).unwrap();
            }
        }
        out.push_str("</g>\n");
        let ly = 56.0 + 14.0 * i as f64;
        writeln!(out, "<line x1=\"480\" y1=\"{}\" x2=\"496\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>", px(ly - 4.0), px(ly - 4.0)).unwrap();
        writeln!(out, "<text x=\"500\" y=\"{}\">{}</text>", px(ly), escape(&s.name)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_and_tick_format() {
        assert_eq!(px(-0.001), "0.00");
        assert_eq!(px(12.345), "12.35");
        assert_eq!(tick(0.25), "0.25");
        assert_eq!(tick(100.0), "100");
        assert_eq!(tick(1e8), "1.00e8");
        assert_eq!(tick(-0.0001), "-1.00e-4");
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }

    #[test]
    fn degenerate_frame_is_finite() {
        let f = Frame::fit(&[(1.0, 1.0), (1.0, 1.0)], 0.0, 0.0, 100.0, 100.0);
        assert_eq!(f.map(1.0, 1.0), (50.0, 50.0));
    }

    #[test]
    fn curve_counts_series_and_points() {
        let svg = curve_svg(
            "sweep",
            "T",
            "d",
            &[Series {
                name: "a".into(),
                points: vec![(0.01, 1.0), (1.0, 2.0), (100.0, 1.5)],
            }],
            true,
        );
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let points = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("point"))
            .count();
        assert_eq!(points, 3);
    }
}

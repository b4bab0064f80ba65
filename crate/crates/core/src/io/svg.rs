use std::fmt::Write as _;

use crate::summary::{Summary, SummaryLayout};
use crate::types::{CurveSet, SampleGrid};

const MEMBER_STYLE: &str = r##"fill="none" stroke="#b0b0b0" stroke-width="0.6""##;
const PROTO_STYLE: &str = r##"fill="none" stroke="#000000" stroke-width="1.6""##;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Affine map from data coordinates to a pixel box.
struct Frame {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    t0: f64,
    t1: f64,
    v0: f64,
    v1: f64,
}

impl Frame {
    fn new(x: f64, y: f64, w: f64, h: f64, grid: &SampleGrid, (v0, v1): (f64, f64)) -> Self {
        let (v0, v1) = if v1 > v0 { (v0, v1) } else { (v0 - 0.5, v0 + 0.5) };
        let pad = 0.05 * (v1 - v0);
        Self {
            x,
            y,
            w,
            h,
            t0: grid.first(),
            t1: grid.last(),
            v0: v0 - pad,
            v1: v1 + pad,
        }
    }

    fn px(&self, t: f64) -> f64 {
        self.x + (t - self.t0) / (self.t1 - self.t0) * self.w
    }

    fn py(&self, v: f64) -> f64 {
        self.y + self.h - (v - self.v0) / (self.v1 - self.v0) * self.h
    }

    fn rect(&self, out: &mut String) {
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#404040" stroke-width="0.8"/>"##,
            self.x, self.y, self.w, self.h
        );
    }

    fn polyline(&self, t: &[f64], v: &[f64]) -> String {
        let mut d = String::new();
        for (i, (&a, &b)) in t.iter().zip(v).enumerate() {
            let _ = write!(d, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, self.px(a), self.py(b));
        }
        d
    }

    /// Path data of a summary: one stroke per segment, each extended to
    /// the first point of the next segment.
    fn summary(&self, s: &Summary) -> String {
        let pts = s.grid().points();
        match s.layout() {
            SummaryLayout::Knots { knots, values } => {
                let t: Vec<f64> = knots.knots().iter().map(|&k| pts[k]).collect();
                self.polyline(&t, values)
            }
            SummaryLayout::Segments {
                segmentation,
                params,
            } => {
                let segs = segmentation.segments();
                let mut d = String::new();
                for (i, (seg, p)) in segs.iter().zip(params).enumerate() {
                    let a = pts[*seg.start()];
                    let b = if i + 1 < segs.len() { pts[*segs[i + 1].start()] } else { pts[*seg.end()] };
                    if !d.is_empty() {
                        d.push(' ');
                    }
                    let _ = write!(
                        d,
                        "M{:.2},{:.2} L{:.2},{:.2}",
                        self.px(a),
                        self.py(p.at(a)),
                        self.px(b),
                        self.py(p.at(b))
                    );
                }
                d
            }
        }
    }
}

fn range<'a>(values: impl IntoIterator<Item = &'a f64>) -> (f64, f64) {
    values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn open(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn title(out: &mut String, x: f64, y: f64, text: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
        escape(text)
    );
}

/// One curve (grey) with its summary (black) on top.
pub fn curve_svg(grid: &SampleGrid, values: &[f64], summary: &Summary, caption: &str) -> String {
    let (w, h) = (640.0, 360.0);
    let fitted = summary.grid_values();
    let frame = Frame::new(40.0, 30.0, w - 60.0, h - 60.0, grid, range(values.iter().chain(&fitted)));
    let mut out = String::new();
    open(&mut out, w, h);
    title(&mut out, 40.0, 20.0, caption);
    frame.rect(&mut out);
    let _ = writeln!(out, r#"<path d="{}" {MEMBER_STYLE}/>"#, frame.polyline(grid.points(), values));
    let _ = writeln!(out, r#"<path d="{}" {PROTO_STYLE}/>"#, frame.summary(summary));
    out.push_str("</svg>\n");
    out
}

/// Several curves (grey) with one summary (black).
pub fn set_svg(set: &CurveSet, members: &[usize], summary: &Summary, caption: &str) -> String {
    panel_svg(set, &[members.to_vec()], std::slice::from_ref(summary), 1, 1, &[Some(0)], &[caption.to_string()])
}

/// Grid of cells, one per cluster: member curves in grey and the
/// prototype in black, all on a shared vertical scale. `cells[c]` is the
/// cluster drawn in cell `c` (row-major); `None` and cells beyond
/// `cells.len()` stay blank.
pub fn panel_svg(
    set: &CurveSet,
    clusters: &[Vec<usize>],
    summaries: &[Summary],
    rows: usize,
    cols: usize,
    cells: &[Option<usize>],
    captions: &[String],
) -> String {
    let (cw, ch) = (220.0, 160.0);
    let (w, h) = (cols as f64 * cw + 20.0, rows as f64 * ch + 20.0);
    let protos: Vec<Vec<f64>> = summaries.iter().map(Summary::grid_values).collect();
    let vr = range(
        clusters
            .iter()
            .flatten()
            .flat_map(|&i| set.row(i))
            .chain(protos.iter().flatten()),
    );
    let mut out = String::new();
    open(&mut out, w, h);
    for (cell, k) in cells.iter().enumerate() {
        let Some(k) = *k else { continue };
        let (r, c) = (cell / cols, cell % cols);
        let (x, y) = (10.0 + c as f64 * cw, 10.0 + r as f64 * ch);
        let frame = Frame::new(x + 6.0, y + 20.0, cw - 12.0, ch - 28.0, set.grid(), vr);
        let _ = writeln!(out, r#"<g class="cell" data-cluster="{k}" data-members="{}">"#, clusters[k].len());
        frame.rect(&mut out);
        let caption = captions.get(cell).cloned().unwrap_or_default();
        title(&mut out, x + 6.0, y + 15.0, &caption);
        for &i in &clusters[k] {
            let _ = writeln!(out, r#"<path d="{}" {MEMBER_STYLE}/>"#, frame.polyline(set.grid().points(), set.row(i)));
        }
        let _ = writeln!(out, r#"<path d="{}" {PROTO_STYLE}/>"#, frame.summary(&summaries[k]));
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Line chart of merge heights, largest merge first.
pub fn heights_svg(heights: &[f64], caption: &str) -> String {
    let (w, h) = (480.0, 320.0);
    let mut out = String::new();
    open(&mut out, w, h);
    title(&mut out, 50.0, 20.0, caption);
    let (x0, y0, pw, ph) = (50.0, 30.0, w - 70.0, h - 70.0);
    let _ = writeln!(
        out,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#404040" stroke-width="0.8"/>"##
    );
    if !heights.is_empty() {
        let top = heights.iter().cloned().fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
        let step = if heights.len() > 1 { pw / (heights.len() - 1) as f64 } else { 0.0 };
        let pt = |i: usize, v: f64| (x0 + i as f64 * step, y0 + ph - v / top * ph);
        let mut d = String::new();
        for (i, &v) in heights.iter().enumerate() {
            let (x, y) = pt(i, v);
            let _ = write!(d, "{}{x:.2},{y:.2}", if i == 0 { "M" } else { " L" });
        }
        let _ = writeln!(out, r#"<path d="{d}" {PROTO_STYLE}/>"#);
        for (i, &v) in heights.iter().enumerate() {
            let (x, y) = pt(i, v);
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5"/>"#);
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="9" text-anchor="middle">{}</text>"#,
                y0 + ph + 14.0,
                i + 2
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

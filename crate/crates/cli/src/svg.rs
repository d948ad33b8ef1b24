//! Deterministic SVG line charts of per-frame PSNR and TC.

use std::fmt::Write;

use mimostream::{ProfileReport, StackPlan};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const PANEL_HEIGHT: f64 = 180.0;
const PSNR_TOP: f64 = 30.0;
const TC_TOP: f64 = 270.0;

struct Panel {
    top: f64,
    lo: f64,
    hi: f64,
}

impl Panel {
    fn new(top: f64, values: &[f64]) -> Self {
        let finite = values.iter().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        let (lo, hi) = if lo > hi {
            (0.0, 1.0)
        } else if lo == hi {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        };
        Self { top, lo, hi }
    }

    /// Infinite values are pinned to the panel edge.
    fn y(&self, v: f64) -> f64 {
        let v = if v.is_finite() {
            v
        } else if v > 0.0 {
            self.hi
        } else {
            self.lo
        };
        self.top + PANEL_HEIGHT * (1.0 - (v - self.lo) / (self.hi - self.lo))
    }
}

fn x_of(i: usize, frames: usize) -> f64 {
    let span = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    MARGIN_LEFT + span * i as f64 / (frames.max(2) - 1) as f64
}

fn polyline(svg: &mut String, values: &[f64], panel: &Panel, frames: usize, class: &str) {
    let points: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| format!("{:.2},{:.2}", x_of(i, frames), panel.y(v)))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline class="{class}" fill="none" stroke="#246" points="{}"/>"##,
        points.join(" ")
    );
}

fn axis(svg: &mut String, panel: &Panel, label: &str) {
    let bottom = panel.top + PANEL_HEIGHT;
    let _ = writeln!(
        svg,
        r##"<rect class="panel" x="{MARGIN_LEFT}" y="{}" width="{}" height="{PANEL_HEIGHT}" fill="none" stroke="#888"/>"##,
        panel.top,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    );
    let _ = writeln!(
        svg,
        r#"<text x="4" y="{:.2}" font-size="12">{label}</text>"#,
        panel.top + 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="4" y="{:.2}" font-size="10">{:.2}</text>"#,
        panel.top + 26.0,
        panel.hi
    );
    let _ = writeln!(
        svg,
        r#"<text x="4" y="{bottom:.2}" font-size="10">{:.2}</text>"#,
        panel.lo
    );
}

/// PSNR (top) and TC (bottom) per frame, with one vertical marker per stack transition.
pub fn emit_profile_svg(report: &ProfileReport, plan: &StackPlan) -> Vec<u8> {
    let frames = report.psnr.len();
    let psnr = Panel::new(PSNR_TOP, &report.psnr);
    let tc = Panel::new(TC_TOP, &report.tc.values);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    axis(&mut svg, &psnr, "PSNR (dB)");
    axis(&mut svg, &tc, "TC");
    for d in plan.transitions() {
        let x = (x_of(d, frames) + x_of(d + 1, frames)) / 2.0;
        let _ = writeln!(
            svg,
            r##"<line class="transition" x1="{x:.2}" y1="{PSNR_TOP}" x2="{x:.2}" y2="{:.2}" stroke="#c33" stroke-dasharray="4 3"/>"##,
            TC_TOP + PANEL_HEIGHT
        );
    }
    polyline(&mut svg, &report.psnr, &psnr, frames, "psnr");
    polyline(&mut svg, &report.tc.values, &tc, frames, "tc");
    svg.push_str("</svg>\n");
    svg.into_bytes()
}

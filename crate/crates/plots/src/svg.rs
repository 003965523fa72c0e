//! Deterministic SVG rendering of trace and forest plots.

use std::fmt::Write;

use metatrace::{Dataset, MarginalSummary};

use crate::error::{Error, Result};
use crate::trace::{BottomPanel, Series, TraceData};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;

pub const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#ad494a",
];

const LEFT: f64 = 70.0;
const RIGHT: f64 = 690.0;
const INF_X: f64 = 720.0;
const TOP_Y0: f64 = 30.0;
const TOP_Y1: f64 = 400.0;
// the trace panel takes the upper 70% of the canvas
const SPLIT: f64 = 0.7 * HEIGHT;
const BOT_Y0: f64 = SPLIT + 20.0;
const BOT_Y1: f64 = 555.0;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceSvgOptions {
    pub title: Option<String>,
    /// Series (study or contrast labels) drawn with dotted ±1.96·sd bands.
    pub highlight: Vec<String>,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Coordinates are printed with two decimals; `-0.00` is normalized.
fn fmt(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Tick label text with as few decimals as the step needs.
fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s[1..].to_string()
    } else {
        s
    }
}

/// Round-number ticks covering `[lo, hi]`.
fn nice_ticks(lo: f64, hi: f64, target: usize) -> (Vec<f64>, f64) {
    let span = (hi - lo).abs().max(1e-12);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|i| i as f64 * step).collect(), step)
}

struct Scale {
    d0: f64,
    d1: f64,
    r0: f64,
    r1: f64,
}

impl Scale {
    fn new(d0: f64, d1: f64, r0: f64, r1: f64) -> Self {
        let (d0, d1) = if d1 > d0 {
            (d0, d1)
        } else {
            (d0 - 0.5, d0 + 0.5)
        };
        Self { d0, d1, r0, r1 }
    }

    fn map(&self, v: f64) -> f64 {
        self.r0 + (v - self.d0) / (self.d1 - self.d0) * (self.r1 - self.r0)
    }
}

fn points(xs: &[f64], ys: &[f64], sx: &Scale, sy: &Scale) -> String {
    let mut s = String::new();
    for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{},{}", fmt(sx.map(*x)), fmt(sy.map(*y)));
    }
    s
}

fn header(svg: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
        w = fmt(width),
        h = fmt(height)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        fmt(width),
        fmt(height)
    );
}

fn x_axis(svg: &mut String, sx: &Scale, y: f64, lo: f64, hi: f64) {
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black"/>"#,
        fmt(sx.r0),
        fmt(sx.r1),
        y = fmt(y)
    );
    let (ticks, step) = nice_ticks(lo, hi, 8);
    for t in ticks {
        let x = fmt(sx.map(t));
        let _ = writeln!(
            svg,
            r#"<line class="tick" x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            fmt(y),
            fmt(y + 4.0),
            fmt(y + 15.0),
            tick_label(t, step)
        );
    }
}

fn y_axis(svg: &mut String, sy: &Scale, x: f64, lo: f64, hi: f64, gridlines_to: Option<f64>) {
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#,
        fmt(sy.r0),
        fmt(sy.r1),
        x = fmt(x)
    );
    let (ticks, step) = nice_ticks(lo, hi, 6);
    for t in ticks {
        let y = fmt(sy.map(t));
        if let Some(x2) = gridlines_to {
            let _ = writeln!(
                svg,
                r##"<line class="grid" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#e6e6e6"/>"##,
                fmt(x),
                fmt(x2)
            );
        }
        let _ = writeln!(
            svg,
            r#"<line class="tick" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{}</text>"#,
            fmt(x - 4.0),
            fmt(x),
            fmt(x - 6.0),
            fmt(sy.map(t) + 4.0),
            tick_label(t, step)
        );
    }
}

/// Two-panel trace plot: conditional estimates above, inference on `τ`
/// below, sharing the horizontal axis.
pub fn render_trace_svg(trace: &TraceData, options: &TraceSvgOptions) -> String {
    let grid = &trace.tau_grid;
    let tau_max = grid.last().copied().unwrap_or(1.0);
    let sx = Scale::new(0.0, tau_max, LEFT, RIGHT);

    let highlighted = |s: &Series| options.highlight.iter().any(|h| h == &s.label);
    let all_series = || trace.study_traces.iter().chain(&trace.contrast_traces);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in all_series() {
        let band = if highlighted(s) { Z95 } else { 0.0 };
        for (m, sd) in s.mean.iter().zip(&s.sd) {
            lo = lo.min(m - band * sd);
            hi = hi.max(m + band * sd);
        }
    }
    for v in trace
        .infinity_refs
        .studies
        .iter()
        .chain(&trace.infinity_refs.contrasts)
    {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    let pad = 0.05 * (hi - lo).max(1e-9);
    let (ylo, yhi) = (lo - pad, hi + pad);
    let sy = Scale::new(ylo, yhi, TOP_Y1, TOP_Y0);

    let mut svg = String::new();
    header(&mut svg, WIDTH, HEIGHT);
    if let Some(title) = &options.title {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
            fmt(0.5 * (LEFT + RIGHT)),
            escape(title)
        );
    }

    // upper panel
    y_axis(&mut svg, &sy, LEFT, ylo, yhi, Some(RIGHT));
    x_axis(&mut svg, &sx, TOP_Y1, 0.0, tau_max);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">effect</text>"#,
        fmt(0.5 * (TOP_Y0 + TOP_Y1)),
        fmt(0.5 * (TOP_Y0 + TOP_Y1))
    );
    let _ = writeln!(
        svg,
        r#"<text class="infinity-label" x="{}" y="{}" text-anchor="middle">τ=∞</text>"#,
        fmt(INF_X),
        fmt(TOP_Y0 - 6.0)
    );

    let draw = |svg: &mut String, s: &Series, kind: &str, color: &str, width: f64, limit: f64| {
        let last = s.mean.last().copied().unwrap_or(limit);
        let _ = writeln!(
            svg,
            r#"<line class="infinity-ref" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-dasharray="1,2"/>"#,
            fmt(RIGHT),
            fmt(sy.map(last)),
            fmt(INF_X),
            fmt(sy.map(limit))
        );
        let _ = writeln!(
            svg,
            r#"<line class="infinity-tick" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}"/><text x="{}" y="{}" fill="{color}" font-size="9">{}</text>"#,
            fmt(INF_X - 4.0),
            fmt(INF_X + 4.0),
            fmt(INF_X + 7.0),
            fmt(sy.map(limit) + 3.0),
            escape(&s.label),
            y = fmt(sy.map(limit))
        );
        let _ = writeln!(
            svg,
            r#"<polyline class="trace {kind}" data-series="{}" points="{}" fill="none" stroke="{color}" stroke-width="{}"/>"#,
            escape(&s.label),
            points(grid, &s.mean, &sx, &sy),
            fmt(width)
        );
        if highlighted(s) {
            for sign in [-1.0, 1.0] {
                let bound: Vec<f64> = s
                    .mean
                    .iter()
                    .zip(&s.sd)
                    .map(|(m, sd)| m + sign * Z95 * sd)
                    .collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline class="trace-bound {kind}" data-series="{}" points="{}" fill="none" stroke="{color}" stroke-width="1" stroke-dasharray="2,3"/>"#,
                    escape(&s.label),
                    points(grid, &bound, &sx, &sy)
                );
            }
        }
    };
    for (i, s) in trace.study_traces.iter().enumerate() {
        let limit = trace
            .infinity_refs
            .studies
            .get(i)
            .copied()
            .unwrap_or(f64::NAN);
        draw(&mut svg, s, "study", PALETTE[i % PALETTE.len()], 1.5, limit);
    }
    for (i, s) in trace.contrast_traces.iter().enumerate() {
        let limit = trace
            .infinity_refs
            .contrasts
            .get(i)
            .copied()
            .unwrap_or(f64::NAN);
        draw(&mut svg, s, "contrast", "black", 2.5, limit);
    }

    // lower panel
    let _ = writeln!(
        svg,
        r#"<line class="divider" x1="0" y1="{y}" x2="{}" y2="{y}" stroke="none"/>"#,
        fmt(WIDTH),
        y = fmt(SPLIT)
    );
    x_axis(&mut svg, &sx, BOT_Y1, 0.0, tau_max);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">heterogeneity τ</text>"#,
        fmt(0.5 * (LEFT + RIGHT)),
        fmt(HEIGHT - 8.0)
    );
    let vline = |svg: &mut String, class: &str, t: f64, y0: f64, y1: f64| {
        let x = fmt(sx.map(t));
        let _ = writeln!(
            svg,
            r#"<line class="{class}" x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#,
            fmt(y0),
            fmt(y1)
        );
    };
    match &trace.bottom_panel {
        BottomPanel::Bayes {
            prior_density,
            posterior_density,
            median,
            ci95,
        } => {
            let mut top = posterior_density.iter().cloned().fold(0.0, f64::max);
            if let Some(p) = prior_density {
                top = top.max(p.iter().cloned().fold(0.0, f64::max));
            }
            let sd = Scale::new(0.0, if top > 0.0 { top } else { 1.0 }, BOT_Y1, BOT_Y0);
            let mut band = format!("{},{}", fmt(sx.map(ci95.0)), fmt(BOT_Y1));
            let at = |t: f64| interpolate(grid, posterior_density, t);
            let _ = write!(band, " {},{}", fmt(sx.map(ci95.0)), fmt(sd.map(at(ci95.0))));
            for (t, d) in grid.iter().zip(posterior_density) {
                if *t > ci95.0 && *t < ci95.1 {
                    let _ = write!(band, " {},{}", fmt(sx.map(*t)), fmt(sd.map(*d)));
                }
            }
            let _ = write!(
                band,
                " {},{} {},{}",
                fmt(sx.map(ci95.1)),
                fmt(sd.map(at(ci95.1))),
                fmt(sx.map(ci95.1)),
                fmt(BOT_Y1)
            );
            let _ = writeln!(
                svg,
                r##"<polygon class="band" points="{band}" fill="#c8c8c8" stroke="none"/>"##
            );
            if let Some(p) = prior_density {
                let _ = writeln!(
                    svg,
                    r#"<polyline class="prior" points="{}" fill="none" stroke="black" stroke-dasharray="6,4"/>"#,
                    points(grid, p, &sx, &sd)
                );
            }
            let _ = writeln!(
                svg,
                r#"<polyline class="posterior" points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
                points(grid, posterior_density, &sx, &sd)
            );
            vline(&mut svg, "estimate", *median, BOT_Y0, BOT_Y1);
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="end">posterior density</text>"#,
                fmt(RIGHT - 6.0),
                fmt(BOT_Y0 + 4.0)
            );
        }
        BottomPanel::Freq {
            q_values,
            chi2_band,
            tau_hat,
            tau_ci95,
        } => {
            let top = q_values
                .iter()
                .cloned()
                .fold(chi2_band.0.max(chi2_band.1), f64::max);
            let sq = Scale::new(0.0, 1.05 * top.max(1e-9), BOT_Y1, BOT_Y0);
            let _ = writeln!(
                svg,
                r##"<rect class="band" x="{}" y="{}" width="{}" height="{}" fill="#c8c8c8" stroke="none"/>"##,
                fmt(sx.map(tau_ci95.0)),
                fmt(BOT_Y0),
                fmt(sx.map(tau_ci95.1) - sx.map(tau_ci95.0)),
                fmt(BOT_Y1 - BOT_Y0)
            );
            for q in [chi2_band.0, chi2_band.1] {
                let y = fmt(sq.map(q));
                let _ = writeln!(
                    svg,
                    r#"<line class="chi2-target" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black" stroke-dasharray="4,3"/>"#,
                    fmt(LEFT),
                    fmt(RIGHT)
                );
            }
            let _ = writeln!(
                svg,
                r#"<polyline class="q-profile" points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
                points(grid, q_values, &sx, &sq)
            );
            vline(&mut svg, "estimate", *tau_hat, BOT_Y0, BOT_Y1);
            y_axis(&mut svg, &sq, LEFT, 0.0, 1.05 * top, None);
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="end">Q(τ)</text>"#,
                fmt(RIGHT - 6.0),
                fmt(BOT_Y0 + 4.0)
            );
        }
        BottomPanel::None => {}
    }
    svg.push_str("</svg>\n");
    svg
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let j = xs.partition_point(|&v| v < x);
    if j == 0 {
        return ys[0];
    }
    if j >= xs.len() {
        return ys[ys.len() - 1];
    }
    let f = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    ys[j - 1] + f * (ys[j] - ys[j - 1])
}

/// Forest plot: raw `y ± 1.96·s` and marginal shrinkage intervals per study,
/// followed by optional overall-mean and prediction rows.
pub fn render_forest_svg(
    data: &Dataset,
    marginals: &[MarginalSummary],
    overall: Option<&MarginalSummary>,
    prediction: Option<&MarginalSummary>,
) -> Result<String> {
    if marginals.len() != data.k() {
        return Err(Error::LengthMismatch {
            what: "forest plot marginals",
            expected: data.k(),
            found: marginals.len(),
        });
    }
    let row_h = 26.0;
    let top = 50.0;
    let extra = overall.is_some() as usize + prediction.is_some() as usize;
    let rows = data.k() + extra;
    let height = top + rows as f64 * row_h + 60.0;
    let (px0, px1) = (170.0, 560.0);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..data.k() {
        lo = lo
            .min(data.y()[i] - Z95 * data.se()[i])
            .min(marginals[i].ci95.0);
        hi = hi
            .max(data.y()[i] + Z95 * data.se()[i])
            .max(marginals[i].ci95.1);
    }
    for m in overall.iter().chain(prediction.iter()) {
        lo = lo.min(m.ci95.0);
        hi = hi.max(m.ci95.1);
    }
    let pad = 0.04 * (hi - lo).max(1e-9);
    let sx = Scale::new(lo - pad, hi + pad, px0, px1);

    let mut svg = String::new();
    header(&mut svg, WIDTH, height);
    let _ = writeln!(
        svg,
        r#"<text x="10" y="{}" font-weight="bold">study</text>"#,
        fmt(top - 18.0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="575" y="{}" font-weight="bold">estimate [95% interval]</text>"#,
        fmt(top - 18.0)
    );
    let bottom = top + rows as f64 * row_h;
    if sx.d0 < 0.0 && sx.d1 > 0.0 {
        let x = fmt(sx.map(0.0));
        let _ = writeln!(
            svg,
            r##"<line class="null" x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#999999" stroke-dasharray="3,3"/>"##,
            fmt(top - 8.0),
            fmt(bottom)
        );
    }
    let interval = |svg: &mut String,
                    class: &str,
                    y: f64,
                    a: f64,
                    b: f64,
                    color: &str,
                    width: f64| {
        let _ = writeln!(
            svg,
            r#"<line class="{class}" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="{}"/>"#,
            fmt(sx.map(a)),
            fmt(sx.map(b)),
            fmt(width),
            y = fmt(y)
        );
    };
    let label = |v: f64, a: f64, b: f64| format!("{v:.2} [{a:.2}, {b:.2}]");
    for i in 0..data.k() {
        let yc = top + (i as f64 + 0.5) * row_h;
        let (y, s) = (data.y()[i], data.se()[i]);
        let m = &marginals[i];
        let _ = writeln!(
            svg,
            r#"<text x="10" y="{}">{}</text>"#,
            fmt(yc + 4.0),
            escape(&data.labels()[i])
        );
        interval(
            &mut svg,
            "raw",
            yc - 4.0,
            y - Z95 * s,
            y + Z95 * s,
            "#555555",
            1.0,
        );
        let _ = writeln!(
            svg,
            r##"<rect class="raw-point" x="{}" y="{}" width="6" height="6" fill="#555555"/>"##,
            fmt(sx.map(y) - 3.0),
            fmt(yc - 7.0)
        );
        interval(
            &mut svg,
            "shrunk",
            yc + 5.0,
            m.ci95.0,
            m.ci95.1,
            "#1f77b4",
            2.0,
        );
        let _ = writeln!(
            svg,
            r##"<circle class="shrunk-point" cx="{}" cy="{}" r="3" fill="#1f77b4"/>"##,
            fmt(sx.map(m.median)),
            fmt(yc + 5.0)
        );
        let _ = writeln!(
            svg,
            r##"<text x="575" y="{}" fill="#555555" font-size="10">{}</text>"##,
            fmt(yc - 1.0),
            label(y, y - Z95 * s, y + Z95 * s)
        );
        let _ = writeln!(
            svg,
            r##"<text x="575" y="{}" fill="#1f77b4" font-size="10">{}</text>"##,
            fmt(yc + 10.0),
            label(m.median, m.ci95.0, m.ci95.1)
        );
    }
    let mut r = data.k();
    for (class, m) in [("overall", overall), ("prediction", prediction)] {
        let Some(m) = m else { continue };
        let yc = top + (r as f64 + 0.5) * row_h;
        let (a, c, b) = (sx.map(m.ci95.0), sx.map(m.median), sx.map(m.ci95.1));
        let fill = if class == "overall" {
            "black"
        } else {
            "#999999"
        };
        let _ = writeln!(
            svg,
            r#"<text x="10" y="{}" font-style="italic">{}</text>"#,
            fmt(yc + 4.0),
            escape(&m.target)
        );
        let _ = writeln!(
            svg,
            r#"<polygon class="{class}" points="{},{y} {},{} {},{y} {},{}" fill="{fill}"/>"#,
            fmt(a),
            fmt(c),
            fmt(yc - 7.0),
            fmt(b),
            fmt(c),
            fmt(yc + 7.0),
            y = fmt(yc)
        );
        let _ = writeln!(
            svg,
            r#"<text x="575" y="{}" font-size="10">{}</text>"#,
            fmt(yc + 4.0),
            label(m.median, m.ci95.0, m.ci95.1)
        );
        r += 1;
    }
    x_axis(&mut svg, &sx, bottom + 6.0, sx.d0, sx.d1);
    svg.push_str("</svg>\n");
    Ok(svg)
}

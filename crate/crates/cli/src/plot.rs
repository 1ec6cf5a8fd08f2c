//! Deterministic SVG rendering of finished runs: trajectory polylines in the
//! `(z/w0, x/w0)` plane and transverse intensity profiles `R^2(x)`, plus the
//! trajectory-table re-reader behind the standalone `plot` subcommand.
//!
//! Rendering is a pure function of the run data — fixed layout, fixed decimal
//! precision, no timestamps — so equal runs produce byte-identical images.

use std::fmt::Write;

use wavetraj_core::output::TRAJECTORIES_HEADER;
use wavetraj_core::TrajectoryLog;

/// What the renderers need from a run: ray positions and amplitudes per
/// recorded sample.
pub struct PlotData {
    pub samples: Vec<PlotSample>,
}

pub struct PlotSample {
    pub t: f64,
    pub rays: Vec<PlotRay>,
}

#[derive(Clone, Copy)]
pub struct PlotRay {
    pub x: f64,
    pub z: f64,
    pub amplitude: f64,
}

impl PlotData {
    pub fn from_log(log: &TrajectoryLog) -> PlotData {
        PlotData {
            samples: log
                .samples
                .iter()
                .map(|s| PlotSample {
                    t: s.t,
                    rays: s
                        .rays
                        .iter()
                        .map(|r| PlotRay { x: r.r.x, z: r.r.z, amplitude: r.amplitude })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Parses a trajectory table written by `wavetraj run`. Errors name the
    /// offending line; the header must match the published schema exactly.
    pub fn from_csv(text: &str) -> Result<PlotData, String> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header == TRAJECTORIES_HEADER => {}
            Some((_, header)) => {
                return Err(format!(
                    "header is '{header}', expected '{TRAJECTORIES_HEADER}'"
                ))
            }
            None => return Err("file is empty".to_string()),
        }

        let mut samples: Vec<PlotSample> = Vec::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 10 {
                return Err(format!("line {lineno}: {} columns, expected 10", cols.len()));
            }
            let float = |i: usize| -> Result<f64, String> {
                cols[i]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        format!("line {lineno}: column {} is not a finite number", i + 1)
                    })
            };
            let t = float(0)?;
            let ray_id = cols[1]
                .parse::<usize>()
                .map_err(|_| format!("line {lineno}: ray_id is not an integer"))?;
            let ray = PlotRay { x: float(2)?, z: float(3)?, amplitude: float(6)? };
            // Momentum, coupling, drift, and flag columns only need to be
            // well-formed.
            float(4)?;
            float(5)?;
            float(7)?;
            float(8)?;
            cols[9]
                .parse::<u32>()
                .map_err(|_| format!("line {lineno}: flags is not an integer"))?;

            if ray_id == 0 {
                samples.push(PlotSample { t, rays: Vec::new() });
            }
            let sample = samples
                .last_mut()
                .ok_or_else(|| format!("line {lineno}: first row must carry ray_id 0"))?;
            if ray_id != sample.rays.len() {
                return Err(format!(
                    "line {lineno}: ray_id {ray_id} out of order (expected {})",
                    sample.rays.len()
                ));
            }
            sample.rays.push(ray);
        }

        if samples.is_empty() {
            return Err("no data rows".to_string());
        }
        let n = samples[0].rays.len();
        if samples.iter().any(|s| s.rays.len() != n) {
            return Err("samples disagree on the ray count".to_string());
        }
        Ok(PlotData { samples })
    }

    fn n_rays(&self) -> usize {
        self.samples[0].rays.len()
    }

    /// Indices of the two rays launched nearest `x = +1` and `x = -1` waist
    /// units — the pair drawn heavy, tracing the beam envelope.
    fn envelope_rays(&self) -> Vec<usize> {
        let launch = &self.samples[0].rays;
        let nearest = |target: f64| {
            launch
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (a.x - target)
                        .abs()
                        .partial_cmp(&(b.x - target).abs())
                        .expect("finite positions")
                })
                .map(|(i, _)| i)
                .expect("nonempty front")
        };
        let plus = nearest(1.0);
        let minus = nearest(-1.0);
        if plus == minus {
            vec![plus]
        } else {
            vec![minus, plus]
        }
    }
}

/// A screen-space rectangle (SVG user units).
#[derive(Clone, Copy)]
struct Rect {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

/// Pads a world range by 4% per side; degenerate ranges open up to ±1 so a
/// single-sample run still renders mid-panel.
fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let p = 0.04 * (hi - lo);
        (lo - p, hi + p)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// Screen coordinate, fixed precision for byte-stable output.
fn c(v: f64) -> String {
    format!("{v:.2}")
}

/// Tick label: up to three decimals with trailing zeros trimmed.
fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, label: &str) {
    writeln!(
        out,
        r##"<text x="{}" y="{}" font-family="monospace" font-size="12" fill="#374151" text-anchor="{anchor}">{label}</text>"##,
        c(x),
        c(y)
    )
    .expect("writing to a String cannot fail");
}

fn vertical_text(out: &mut String, x: f64, y: f64, label: &str) {
    writeln!(
        out,
        r##"<text x="{}" y="{}" font-family="monospace" font-size="12" fill="#374151" text-anchor="middle" transform="rotate(-90 {} {})">{label}</text>"##,
        c(x),
        c(y),
        c(x),
        c(y)
    )
    .expect("writing to a String cannot fail");
}

fn polyline(out: &mut String, pts: &[(f64, f64)], style: &str) {
    if pts.len() < 2 {
        return;
    }
    let mut attr = String::with_capacity(pts.len() * 14);
    for (i, (x, y)) in pts.iter().enumerate() {
        if i > 0 {
            attr.push(' ');
        }
        attr.push_str(&c(*x));
        attr.push(',');
        attr.push_str(&c(*y));
    }
    writeln!(out, r#"<polyline fill="none" {style} points="{attr}"/>"#)
        .expect("writing to a String cannot fail");
}

/// Axes frame: border, min/mid/max ticks on both axes, and axis names.
fn frame(out: &mut String, r: Rect, xr: (f64, f64), yr: (f64, f64), xlabel: &str, ylabel: &str) {
    writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#6b7280" stroke-width="1"/>"##,
        c(r.x),
        c(r.y),
        c(r.w),
        c(r.h)
    )
    .expect("writing to a String cannot fail");
    let anchors = ["start", "middle", "end"];
    for (i, f) in [0.0, 0.5, 1.0].into_iter().enumerate() {
        let xv = xr.0 + f * (xr.1 - xr.0);
        let yv = yr.0 + f * (yr.1 - yr.0);
        text(out, r.x + f * r.w, r.y + r.h + 16.0, anchors[i], &tick(xv));
        text(out, r.x - 6.0, r.y + r.h - f * r.h + 4.0, "end", &tick(yv));
    }
    text(out, r.x + r.w / 2.0, r.y + r.h + 32.0, "middle", xlabel);
    vertical_text(out, r.x - 46.0, r.y + r.h / 2.0, ylabel);
}

/// Trajectory panel: every ray as a thin polyline, the launch front dashed,
/// and the two envelope rays (launched at ±1 waist) drawn heavy.
fn trajectory_panel(out: &mut String, data: &PlotData, r: Rect) {
    let mut z = (f64::INFINITY, f64::NEG_INFINITY);
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    for sample in &data.samples {
        for ray in &sample.rays {
            z = (z.0.min(ray.z), z.1.max(ray.z));
            x = (x.0.min(ray.x), x.1.max(ray.x));
        }
    }
    let zr = pad_range(z.0, z.1);
    let xr = pad_range(x.0, x.1);
    let sx = |v: f64| r.x + (v - zr.0) / (zr.1 - zr.0) * r.w;
    let sy = |v: f64| r.y + r.h - (v - xr.0) / (xr.1 - xr.0) * r.h;

    frame(out, r, zr, xr, "z / w0", "x / w0");

    // Launch front, for orientation (and the whole picture of a zero-length
    // run).
    let front: Vec<(f64, f64)> =
        data.samples[0].rays.iter().map(|ray| (sx(ray.z), sy(ray.x))).collect();
    polyline(
        out,
        &front,
        r##"stroke="#6b7280" stroke-width="1" stroke-dasharray="4 3""##,
    );

    if data.samples.len() < 2 {
        return;
    }
    let envelope = data.envelope_rays();
    for j in 0..data.n_rays() {
        if envelope.contains(&j) {
            continue;
        }
        let pts: Vec<(f64, f64)> = data
            .samples
            .iter()
            .map(|s| (sx(s.rays[j].z), sy(s.rays[j].x)))
            .collect();
        polyline(out, &pts, r##"stroke="#b3bcc9" stroke-width="0.5""##);
    }
    for &j in &envelope {
        let pts: Vec<(f64, f64)> = data
            .samples
            .iter()
            .map(|s| (sx(s.rays[j].z), sy(s.rays[j].x)))
            .collect();
        polyline(out, &pts, r##"class="envelope" stroke="#111827" stroke-width="2""##);
    }
}

/// One transverse intensity profile `R^2(x)`, over a shared `x` range and
/// intensity scale.
fn intensity_panel(
    out: &mut String,
    sample: &PlotSample,
    r: Rect,
    xr: (f64, f64),
    y_max: f64,
    caption: &str,
) {
    let yr = (0.0, y_max);
    let sx = |v: f64| r.x + (v - xr.0) / (xr.1 - xr.0) * r.w;
    let sy = |v: f64| r.y + r.h - (v - yr.0) / (yr.1 - yr.0) * r.h;
    frame(out, r, xr, yr, "x / w0", "R^2");
    let pts: Vec<(f64, f64)> = sample
        .rays
        .iter()
        .map(|ray| (sx(ray.x), sy(ray.amplitude * ray.amplitude)))
        .collect();
    polyline(out, &pts, r##"stroke="#1f6feb" stroke-width="1.5""##);
    text(out, r.x + 6.0, r.y + 16.0, "start", caption);
}

/// Shared `x` range and intensity ceiling across the initial and final
/// profiles, so the two panels are directly comparable.
fn intensity_scales(data: &PlotData) -> ((f64, f64), f64) {
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut p = 0.0f64;
    for sample in [&data.samples[0], data.samples.last().expect("nonempty")] {
        for ray in &sample.rays {
            x = (x.0.min(ray.x), x.1.max(ray.x));
            p = p.max(ray.amplitude * ray.amplitude);
        }
    }
    (pad_range(x.0, x.1), if p > 0.0 { 1.05 * p } else { 1.0 })
}

fn svg_open(out: &mut String, w: f64, h: f64) {
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)
        .expect("writing to a String cannot fail");
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .expect("writing to a String cannot fail");
    writeln!(out, r##"<rect width="{w}" height="{h}" fill="#ffffff"/>"##)
        .expect("writing to a String cannot fail");
}

fn title_line(out: &mut String, title: Option<&str>) {
    if let Some(t) = title {
        text(out, 16.0, 20.0, "start", t);
    }
}

/// Full-width trajectory figure.
pub fn trajectories_svg(data: &PlotData, title: Option<&str>) -> String {
    let mut out = String::new();
    svg_open(&mut out, 720.0, 480.0);
    title_line(&mut out, title);
    trajectory_panel(&mut out, data, Rect { x: 62.0, y: 34.0, w: 640.0, h: 396.0 });
    out.push_str("</svg>\n");
    out
}

/// Initial and final transverse intensity profiles side by side (a single
/// panel when the run recorded only one sample).
pub fn intensity_svg(data: &PlotData, title: Option<&str>) -> String {
    let mut out = String::new();
    svg_open(&mut out, 720.0, 360.0);
    title_line(&mut out, title);
    let (xr, y_max) = intensity_scales(data);
    let first = &data.samples[0];
    if data.samples.len() < 2 {
        intensity_panel(
            &mut out,
            first,
            Rect { x: 62.0, y: 34.0, w: 640.0, h: 280.0 },
            xr,
            y_max,
            &format!("t = {}", tick(first.t)),
        );
    } else {
        let last = data.samples.last().expect("nonempty");
        intensity_panel(
            &mut out,
            first,
            Rect { x: 62.0, y: 34.0, w: 295.0, h: 280.0 },
            xr,
            y_max,
            &format!("t = {}", tick(first.t)),
        );
        intensity_panel(
            &mut out,
            last,
            Rect { x: 407.0, y: 34.0, w: 295.0, h: 280.0 },
            xr,
            y_max,
            &format!("t = {}", tick(last.t)),
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Combined figure: trajectories on the left, the initial (top right) and
/// final (bottom right) intensity profiles beside them.
pub fn combined_svg(data: &PlotData, title: Option<&str>) -> String {
    let mut out = String::new();
    svg_open(&mut out, 1100.0, 480.0);
    title_line(&mut out, title);
    trajectory_panel(&mut out, data, Rect { x: 62.0, y: 34.0, w: 600.0, h: 396.0 });
    let (xr, y_max) = intensity_scales(data);
    let first = &data.samples[0];
    if data.samples.len() < 2 {
        intensity_panel(
            &mut out,
            first,
            Rect { x: 760.0, y: 34.0, w: 320.0, h: 396.0 },
            xr,
            y_max,
            &format!("t = {}", tick(first.t)),
        );
    } else {
        let last = data.samples.last().expect("nonempty");
        intensity_panel(
            &mut out,
            first,
            Rect { x: 760.0, y: 34.0, w: 320.0, h: 160.0 },
            xr,
            y_max,
            &format!("t = {}", tick(first.t)),
        );
        intensity_panel(
            &mut out,
            last,
            Rect { x: 760.0, y: 270.0, w: 320.0, h: 160.0 },
            xr,
            y_max,
            &format!("t = {}", tick(last.t)),
        );
    }
    out.push_str("</svg>\n");
    out
}

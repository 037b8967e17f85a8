//! Self-contained SVG output. Coordinates are printed with fixed precision
//! so identical inputs give identical bytes.

use std::f64::consts::PI;
use std::fmt::Write;
use std::path::Path;

use crate::error::{LabError, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

/// One continuity row: `ĝ` at magnitude `t` with its interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodSetPoint {
    pub t: f64,
    pub g: f64,
    pub lo: f64,
    pub hi: f64,
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="20" text-anchor="middle">{title}</text>"#, WIDTH / 2.0);
}

fn frame(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
}

/// `ĝ` against `t` on a log₁₀ axis with the confidence band shaded.
pub fn goodset_svg(series: &[GoodSetPoint]) -> Result<String> {
    if series.is_empty() {
        return Err(LabError::InvalidArgument("empty plot series".into()));
    }
    if series.iter().any(|p| !(p.t > 0.0) || !p.g.is_finite() || !p.lo.is_finite() || !p.hi.is_finite()) {
        return Err(LabError::InvalidArgument("plot points need t > 0 and finite values".into()));
    }
    let mut pts = series.to_vec();
    pts.sort_by(|a, b| a.t.total_cmp(&b.t));
    let lmin = pts[0].t.log10().floor();
    let mut lmax = pts[pts.len() - 1].t.log10().ceil();
    if lmax <= lmin {
        lmax = lmin + 1.0;
    }
    let sx = |t: f64| MARGIN + (t.log10() - lmin) / (lmax - lmin) * (WIDTH - 2.0 * MARGIN);
    let sy = |g: f64| HEIGHT - MARGIN - g.clamp(0.0, 1.0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    header(&mut out, "good-set measure vs perturbation size");
    frame(&mut out);
    for decade in lmin as i64..=lmax as i64 {
        let x = sx(10f64.powi(decade as i32));
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{decade}</text>"#,
            HEIGHT - MARGIN,
            HEIGHT - MARGIN + 5.0,
            HEIGHT - MARGIN + 18.0
        );
    }
    for tick in 0..=4 {
        let g = tick as f64 / 4.0;
        let y = sy(g);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{g:.2}</text>"#,
            MARGIN - 5.0,
            MARGIN - 8.0,
            y + 4.0
        );
    }
    let mut band = String::new();
    for p in &pts {
        let _ = write!(band, "{:.2},{:.2} ", sx(p.t), sy(p.hi));
    }
    for p in pts.iter().rev() {
        let _ = write!(band, "{:.2},{:.2} ", sx(p.t), sy(p.lo));
    }
    let _ = writeln!(out, r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>"##, band.trim_end());
    if pts.len() > 1 {
        let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.t), sy(p.g))).collect();
        let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#08519c"/>"##, line.join(" "));
    }
    for p in &pts {
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#08519c"/>"##, sx(p.t), sy(p.g));
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t (log scale)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    out.push_str("</svg>\n");
    Ok(out)
}

/// Histogram of angles in `[0, π)` with vertical markers (e.g. mean `E^u`
/// and `E^s`).
pub fn histogram_svg(angles: &[f64], bins: usize, markers: &[(f64, &str)]) -> Result<String> {
    if angles.is_empty() || bins == 0 {
        return Err(LabError::InvalidArgument("empty histogram".into()));
    }
    let mut counts = vec![0usize; bins];
    for &a in angles {
        let b = ((a / PI) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize;
        counts[b] += 1;
    }
    let peak = *counts.iter().max().unwrap_or(&1) as f64;
    let w = (WIDTH - 2.0 * MARGIN) / bins as f64;
    let sx = |a: f64| MARGIN + a / PI * (WIDTH - 2.0 * MARGIN);
    let mut out = String::new();
    header(&mut out, "direction histogram");
    frame(&mut out);
    for (i, &c) in counts.iter().enumerate() {
        let h = c as f64 / peak * (HEIGHT - 2.0 * MARGIN);
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#6baed6"/>"##,
            MARGIN + i as f64 * w,
            HEIGHT - MARGIN - h,
            w,
            h
        );
    }
    for (angle, label) in markers {
        let x = sx(*angle);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{:.2}" stroke="#cb181d" stroke-dasharray="4 3"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" fill="#cb181d">{label}</text>"##,
            HEIGHT - MARGIN,
            MARGIN - 6.0
        );
    }
    for (tick, label) in [(0.0, "0"), (PI / 2.0, "π/2"), (PI, "π")] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            sx(tick),
            HEIGHT - MARGIN + 18.0
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg)?;
    Ok(())
}

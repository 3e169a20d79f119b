//! Per-class Gaussian kernel density curves over projected scores, their
//! TSV export and a static SVG rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

use crate::label::Label;
use crate::project::ProjectionResult;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KdeError {
    #[error("class {0} needs at least two distinct scores for a density estimate")]
    TooFewPoints(Label),
    #[error("class {0} has zero variance")]
    ZeroVariance(Label),
    #[error("grid needs at least 2 points")]
    Grid,
}

/// Grid margin on each side, in bandwidths. Four bandwidths leave at most
/// Φ(-4) ≈ 3e-5 of any kernel's mass off the grid.
pub const GRID_MARGIN_BANDWIDTHS: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density_per_class: BTreeMap<Label, Vec<f64>>,
    pub bandwidth_per_class: BTreeMap<Label, f64>,
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn gaussian(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

/// `(1/(n h)) Σ φ((x - x_i)/h)`.
pub fn kde_at(points: &[f64], bandwidth: f64, x: f64) -> f64 {
    let n = points.len() as f64;
    points.iter().map(|&p| gaussian((x - p) / bandwidth)).sum::<f64>() / (n * bandwidth)
}

/// Scott's rule with the sample (n-1) standard deviation.
pub fn scott_bandwidth(points: &[f64]) -> f64 {
    let n = points.len() as f64;
    let mean = points.iter().sum::<f64>() / n;
    let var = points.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0);
    n.powf(-0.2) * var.sqrt()
}

/// Evaluates a density per class on a shared grid. `bandwidth` overrides
/// Scott's rule for every class.
pub fn kde_with(result: &ProjectionResult, grid_points: usize, bandwidth: Option<f64>) -> Result<DensityCurve, KdeError> {
    if grid_points < 2 {
        return Err(KdeError::Grid);
    }
    let mut classes = BTreeMap::new();
    for label in [Label::Success, Label::Other] {
        let pts = result.scores_for(label);
        if pts.is_empty() {
            continue;
        }
        let mut distinct = pts.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(if pts.len() >= 2 { KdeError::ZeroVariance(label) } else { KdeError::TooFewPoints(label) });
        }
        let h = bandwidth.unwrap_or_else(|| scott_bandwidth(&pts));
        if !(h > 0.0 && h.is_finite()) {
            return Err(KdeError::ZeroVariance(label));
        }
        classes.insert(label, (pts, h));
    }
    if classes.is_empty() {
        return Err(KdeError::TooFewPoints(Label::Success));
    }
    let all = classes.values().flat_map(|(p, _)| p.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let h_max = classes.values().map(|(_, h)| *h).fold(0.0, f64::max);
    let start = lo - GRID_MARGIN_BANDWIDTHS * h_max;
    let stop = hi + GRID_MARGIN_BANDWIDTHS * h_max;
    let step = (stop - start) / (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points).map(|i| start + step * i as f64).collect();

    let mut density_per_class = BTreeMap::new();
    let mut bandwidth_per_class = BTreeMap::new();
    for (label, (pts, h)) in classes {
        density_per_class.insert(label, grid.iter().map(|&x| kde_at(&pts, h, x)).collect());
        bandwidth_per_class.insert(label, h);
    }
    Ok(DensityCurve { grid, density_per_class, bandwidth_per_class })
}

pub fn kde(result: &ProjectionResult, grid_points: usize) -> Result<DensityCurve, KdeError> {
    kde_with(result, grid_points, None)
}

pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2).zip(values.windows(2)).map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0).sum()
}

impl DensityCurve {
    pub fn class(&self, label: Label) -> Option<&[f64]> {
        self.density_per_class.get(&label).map(Vec::as_slice)
    }

    /// `x\tdensity_success\tdensity_other`; a missing class is written as 0.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x\tdensity_success\tdensity_other")?;
        let s = self.class(Label::Success);
        let o = self.class(Label::Other);
        for (i, x) in self.grid.iter().enumerate() {
            let ds = s.map_or(0.0, |v| v[i]);
            let d_other = o.map_or(0.0, |v| v[i]);
            writeln!(w, "{x:?}\t{ds:?}\t{d_other:?}")?;
        }
        Ok(())
    }

    pub fn to_svg(&self, style: &SvgStyle) -> String {
        render_svg(self, style)
    }
}

#[derive(Clone, Debug)]
pub struct SvgStyle {
    pub width: u32,
    pub height: u32,
    pub title: String,
    pub x_label: String,
    pub success_color: String,
    pub other_color: String,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            width: 640,
            height: 400,
            title: String::new(),
            x_label: "projection".into(),
            success_color: "#1f77b4".into(),
            other_color: "#d62728".into(),
        }
    }
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= target as f64).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= hi + step * 1e-9 {
        ticks.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    ticks
}

fn render_svg(curve: &DensityCurve, style: &SvgStyle) -> String {
    let (w, h) = (style.width as f64, style.height as f64);
    let (left, right, top, bottom) = (60.0, 20.0, if style.title.is_empty() { 20.0 } else { 40.0 }, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let x0 = *curve.grid.first().unwrap_or(&0.0);
    let x1 = *curve.grid.last().unwrap_or(&1.0);
    let ymax = curve.density_per_class.values().flatten().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE) * 1.05;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - y / ymax * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    if !style.title.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(&style.title));
    }
    let _ = writeln!(s, r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, top + ph, left + pw, top + ph);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, top + ph);
    for t in nice_ticks(x0, x1, 6) {
        let x = sx(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, top + ph, top + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, top + ph + 18.0, fmt_tick(t));
    }
    for t in nice_ticks(0.0, ymax, 5) {
        let y = sy(t);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, left - 8.0, y + 4.0, fmt_tick(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 10.0, escape(&style.x_label));
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">density</text>"#, top + ph / 2.0, top + ph / 2.0);

    let mut legend_y = top + 12.0;
    for (label, color) in [(Label::Success, &style.success_color), (Label::Other, &style.other_color)] {
        let Some(ys) = curve.class(label) else { continue };
        let mut path = String::new();
        for (i, (x, y)) in curve.grid.iter().zip(ys).enumerate() {
            let _ = write!(path, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, sx(*x), sy(*y));
        }
        let _ = writeln!(s, r#"<path d="{path}" fill="{color}" fill-opacity="0.25" stroke="{color}" stroke-width="2"/>"#);
        let lx = left + pw - 110.0;
        let _ = writeln!(s, r#"<rect x="{lx}" y="{}" width="14" height="10" fill="{color}"/>"#, legend_y - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{legend_y}">{label}</text>"#, lx + 20.0);
        legend_y += 18.0;
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{t:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

//! Static plot artifacts: two-column CSV tables and plain SVG charts.
//!
//! Output is a pure function of the input, so files are byte-identical
//! across runs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SymEigen;
use crate::model::{Dataset, GmmParams};
use crate::scalar::Scalar;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartKind {
    Line,
    Scatter,
}

/// Named `(x, y)` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub x_label: String,
    pub y_label: String,
    pub rows: Vec<(f64, f64)>,
}

impl Table {
    pub fn new(x_label: impl Into<String>, y_label: impl Into<String>, rows: Vec<(f64, f64)>) -> Self {
        Self { x_label: x_label.into(), y_label: y_label.into(), rows }
    }

    /// Iteration number (from 1) against value.
    pub fn from_trace<T: Scalar>(y_label: &str, trace: &[T]) -> Self {
        Self::new("iteration", y_label, trace.iter().enumerate().map(|(i, v)| ((i + 1) as f64, v.f64())).collect())
    }
}

/// Writes `table` as CSV to `path` and, if `chart` is given, an SVG next to it.
pub fn emit_plot_data(table: &Table, path: &Path, chart: Option<ChartKind>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([&table.x_label, &table.y_label])?;
    for (x, y) in &table.rows {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    if let Some(kind) = chart {
        std::fs::write(path.with_extension("svg"), table_svg(table, kind))?;
    }
    Ok(())
}

/// Points `μ + √σ₁ e₁ cos θ + √σ₂ e₂ sin θ` for `n` equally spaced `θ ∈ [0, 2π)`,
/// where `σᵢ, eᵢ` are the eigenpairs of the 2×2 covariance: the one-sigma contour.
pub fn ellipse_points<T: Scalar>(mean: &[T], cov: &crate::linalg::Matrix<T>, n: usize) -> Result<Vec<[f64; 2]>> {
    if mean.len() != 2 || cov.rows() != 2 || !cov.is_square() {
        return Err(Error::DimensionMismatch { expected: 2, found: mean.len().max(cov.rows()) });
    }
    let eig = SymEigen::new(cov);
    let (e1, e2) = (eig.vector(0), eig.vector(1));
    let (s1, s2) = (eig.values[0].f64(), eig.values[1].f64());
    if !(s1 > 0.0 && s2 > 0.0) {
        return Err(Error::CovarianceNotPd);
    }
    let (r1, r2) = (s1.sqrt(), s2.sqrt());
    Ok((0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            let (c, s) = (t.cos(), t.sin());
            [0, 1].map(|a| mean[a].f64() + r1 * e1[a].f64() * c + r2 * e2[a].f64() * s)
        })
        .collect())
}

/// Scatter of a 2-D dataset coloured by `labels` (discarded points grey), with
/// the one-sigma ellipse of every component of `params`. CSV columns are
/// `x1,x2,label` with 1-based labels and 0 for discarded points.
pub fn emit_scatter<T: Scalar>(
    data: &Dataset<T>,
    labels: &[Option<usize>],
    params: Option<&GmmParams<T>>,
    path: &Path,
) -> Result<()> {
    if data.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: data.dim() });
    }
    if labels.len() != data.n() {
        return Err(Error::LengthMismatch { expected: data.n(), found: labels.len() });
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x1", "x2", "label"])?;
    for (y, l) in data.iter().zip(labels) {
        w.write_record([y[0].f64().to_string(), y[1].f64().to_string(), l.map_or(0, |l| l + 1).to_string()])?;
    }
    w.flush()?;

    let points: Vec<[f64; 2]> = data.iter().map(|y| [y[0].f64(), y[1].f64()]).collect();
    let ellipses = match params {
        Some(p) => {
            (0..p.k()).map(|k| ellipse_points(&p.means[k], &p.covariances[k], 120)).collect::<Result<Vec<_>>>()?
        }
        None => Vec::new(),
    };
    let frame = Frame::fit(points.iter().chain(ellipses.iter().flatten()).map(|p| (p[0], p[1])));
    let mut svg = frame.open("x1", "x2");
    for (p, l) in points.iter().zip(labels) {
        let colour = l.map_or("#999999", |l| PALETTE[l % PALETTE.len()]);
        let (x, y) = frame.map(p[0], p[1]);
        let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.5" fill="{colour}" fill-opacity="0.6"/>"#);
    }
    for (k, e) in ellipses.iter().enumerate() {
        svg += &frame.polyline(e.iter().map(|p| (p[0], p[1])), PALETTE[k % PALETTE.len()], true);
    }
    svg += "</svg>\n";
    std::fs::write(path.with_extension("svg"), svg)?;
    Ok(())
}

fn table_svg(table: &Table, kind: ChartKind) -> String {
    let frame = Frame::fit(table.rows.iter().copied());
    let mut svg = frame.open(&table.x_label, &table.y_label);
    match kind {
        ChartKind::Line => svg += &frame.polyline(table.rows.iter().copied(), PALETTE[0], false),
        ChartKind::Scatter => {
            for &(x, y) in &table.rows {
                let (x, y) = frame.map(x, y);
                let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{}"/>"#, PALETTE[0]);
            }
        }
    }
    svg += "</svg>\n";
    svg
}

/// Data bounds and their mapping onto the canvas.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = x;
        for (a, b) in points.filter(|(a, b)| a.is_finite() && b.is_finite()) {
            x = (x.0.min(a), x.1.max(a));
            y = (y.0.min(b), y.1.max(b));
        }
        let widen = |r: (f64, f64)| {
            if !(r.0 <= r.1) {
                (0.0, 1.0)
            } else if r.0 == r.1 {
                (r.0 - 0.5, r.1 + 0.5)
            } else {
                r
            }
        };
        Self { x: widen(x), y: widen(y) }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let u = MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN);
        let v = HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN);
        (u, v)
    }

    fn open(&self, x_label: &str, y_label: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="#444444"/>"##,
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 2.0 * MARGIN
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 8.0,
            escape(x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="12" y="{}" text-anchor="middle" transform="rotate(-90 12 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(y_label)
        );
        for (v, anchor, (x, y)) in [
            (self.x.0, "start", (MARGIN, HEIGHT - MARGIN + 14.0)),
            (self.x.1, "end", (WIDTH - MARGIN, HEIGHT - MARGIN + 14.0)),
            (self.y.0, "end", (MARGIN - 4.0, HEIGHT - MARGIN)),
            (self.y.1, "end", (MARGIN - 4.0, MARGIN + 8.0)),
        ] {
            let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.3}</text>"#);
        }
        s
    }

    fn polyline(&self, points: impl Iterator<Item = (f64, f64)>, colour: &str, closed: bool) -> String {
        let coords: Vec<String> = points
            .map(|(x, y)| {
                let (u, v) = self.map(x, y);
                format!("{u:.2},{v:.2}")
            })
            .collect();
        let tag = if closed { "polygon" } else { "polyline" };
        format!("<{tag} points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\"/>\n", coords.join(" "))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

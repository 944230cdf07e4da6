//! Deterministic CSV emission and static SVG comparison plots.
//!
//! CSV files are UTF-8 with a header row, `.` decimal separator, and rows in
//! replica order, so identical `(config, seed)` pairs produce byte-identical
//! output on the same build.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// Write a CSV file from a header and preformatted rows.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text)
}

/// An empirical series: points with confidence bars.
#[derive(Debug, Clone)]
pub struct ErrorBarSeries {
    pub label: String,
    /// (x, y, lo, hi)
    pub points: Vec<(f64, f64, f64, f64)>,
}

/// A theory curve drawn as a polyline.
#[derive(Debug, Clone)]
pub struct CurveSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 62.0;
const MARGIN_R: f64 = 18.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 48.0;
const POINT_COLORS: [&str; 3] = ["#1f6fb2", "#b25a1f", "#4a8c2a"];
const CURVE_COLORS: [&str; 3] = ["#c03030", "#6040a0", "#208080"];

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| span / s <= 6.0)
        .unwrap_or(mag * 10.0);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(t);
        t += step;
    }
    out
}

/// Static comparison plot: empirical points with error bars against theory
/// curves.
pub fn write_svg_comparison(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    empirical: &[ErrorBarSeries],
    theory: &[CurveSeries],
) -> io::Result<()> {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in empirical {
        for &(x, y, lo, hi) in &s.points {
            xs.push(x);
            ys.extend([y, lo, hi]);
        }
    }
    for c in theory {
        for &(x, y) in &c.points {
            xs.push(x);
            ys.push(y);
        }
    }
    if xs.is_empty() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "nothing to plot",
        ));
    }
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);
    let sx = |x: f64| {
        MARGIN_L + (x - x_min) / (x_max - x_min).max(1e-12) * (WIDTH - MARGIN_L - MARGIN_R)
    };
    let sy = |y: f64| {
        HEIGHT
            - MARGIN_B
            - (y - y_min) / (y_max - y_min).max(1e-12) * (HEIGHT - MARGIN_T - MARGIN_B)
    };

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{tx}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n",
        tx = WIDTH / 2.0,
    );
    // Axes.
    let _ = write!(
        svg,
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = MARGIN_L,
        r = WIDTH - MARGIN_R,
        t = MARGIN_T,
        b = HEIGHT - MARGIN_B,
    );
    for tick in nice_ticks(x_min, x_max) {
        let x = sx(tick);
        let _ = write!(
            svg,
            "<line x1=\"{x}\" y1=\"{b}\" x2=\"{x}\" y2=\"{b2}\" stroke=\"black\"/>\n\
             <text x=\"{x}\" y=\"{ty}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{tick:.3}</text>\n",
            b = HEIGHT - MARGIN_B,
            b2 = HEIGHT - MARGIN_B + 5.0,
            ty = HEIGHT - MARGIN_B + 18.0,
        );
    }
    for tick in nice_ticks(y_min, y_max) {
        let y = sy(tick);
        let _ = write!(
            svg,
            "<line x1=\"{l}\" y1=\"{y}\" x2=\"{l2}\" y2=\"{y}\" stroke=\"black\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{tick:.3}</text>\n",
            l = MARGIN_L,
            l2 = MARGIN_L - 5.0,
            tx = MARGIN_L - 8.0,
            ty = y + 4.0,
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{xc}\" y=\"{yb}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{x_label}</text>\n\
         <text x=\"16\" y=\"{ym}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {ym})\">{y_label}</text>\n",
        xc = (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        yb = HEIGHT - 12.0,
        ym = (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
    );
    // Theory curves first so points draw on top.
    for (i, curve) in theory.iter().enumerate() {
        let color = CURVE_COLORS[i % CURVE_COLORS.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            pts.join(" ")
        );
    }
    for (i, series) in empirical.iter().enumerate() {
        let color = POINT_COLORS[i % POINT_COLORS.len()];
        for &(x, y, lo, hi) in &series.points {
            let (px, py, plo, phi) = (sx(x), sy(y), sy(lo), sy(hi));
            let _ = write!(
                svg,
                "<line x1=\"{px}\" y1=\"{plo}\" x2=\"{px}\" y2=\"{phi}\" stroke=\"{color}\"/>\n\
                 <line x1=\"{x0}\" y1=\"{plo}\" x2=\"{x1}\" y2=\"{plo}\" stroke=\"{color}\"/>\n\
                 <line x1=\"{x0}\" y1=\"{phi}\" x2=\"{x1}\" y2=\"{phi}\" stroke=\"{color}\"/>\n\
                 <circle cx=\"{px}\" cy=\"{py}\" r=\"3\" fill=\"{color}\"/>\n",
                x0 = px - 3.0,
                x1 = px + 3.0,
            );
        }
    }
    // Legend.
    let mut ly = MARGIN_T + 6.0;
    for (i, series) in empirical.iter().enumerate() {
        let color = POINT_COLORS[i % POINT_COLORS.len()];
        let _ = write!(
            svg,
            "<circle cx=\"{x}\" cy=\"{ly}\" r=\"3\" fill=\"{color}\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            series.label,
            x = WIDTH - MARGIN_R - 150.0,
            tx = WIDTH - MARGIN_R - 142.0,
            ty = ly + 4.0,
        );
        ly += 16.0;
    }
    for (i, curve) in theory.iter().enumerate() {
        let color = CURVE_COLORS[i % CURVE_COLORS.len()];
        let _ = write!(
            svg,
            "<line x1=\"{x0}\" y1=\"{ly}\" x2=\"{x1}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            curve.label,
            x0 = WIDTH - MARGIN_R - 156.0,
            x1 = WIDTH - MARGIN_R - 144.0,
            tx = WIDTH - MARGIN_R - 142.0,
            ty = ly + 4.0,
        );
        ly += 16.0;
    }
    svg.push_str("</svg>\n");
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, svg)
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if (hi - lo).abs() < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = (hi - lo) * 0.06;
        (lo - pad, hi + pad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_byte_deterministic() {
        let dir = std::env::temp_dir().join("rwre-report-test");
        let path = dir.join("t.csv");
        let rows = vec!["1,2.5".to_string(), "2,3.25".to_string()];
        write_csv(&path, "a,b", &rows).unwrap();
        let first = std::fs::read(&path).unwrap();
        write_csv(&path, "a,b", &rows).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
        assert_eq!(String::from_utf8(first).unwrap(), "a,b\n1,2.5\n2,3.25\n");
    }

    #[test]
    fn svg_renders_points_and_curves() {
        let dir = std::env::temp_dir().join("rwre-report-test");
        let path = dir.join("t.svg");
        let emp = vec![ErrorBarSeries {
            label: "empirical".into(),
            points: vec![(0.1, 0.5, 0.45, 0.55), (0.2, 0.6, 0.55, 0.65)],
        }];
        let theory = vec![CurveSeries {
            label: "theory".into(),
            points: vec![(0.05, 0.48), (0.25, 0.62)],
        }];
        write_svg_comparison(&path, "t", "x", "y", &emp, &theory).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains("polyline"));
        assert!(text.contains("circle"));
    }
}

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;

/// Formats a float for tables: shortest round-trip form, `inf` for infinity.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Writes `# generated <timestamp>`, the config echo as `#` lines, then the
/// table; a final `# FAILED ...` line marks failed runs.
pub fn write_csv(
    path: &Path,
    timestamp: &str,
    cfg: &ExperimentConfig,
    table: &Table,
    failure: Option<&str>,
) -> io::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "# generated {timestamp}")?;
    for line in cfg.to_text().lines() {
        writeln!(out, "# {line}")?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    if let Some(msg) = failure {
        writeln!(out, "# FAILED {msg}")?;
    }
    out.flush()
}

/// Strips the timestamp line from a CSV produced by [`write_csv`].
pub fn csv_body(text: &str) -> &str {
    match text.split_once('\n') {
        Some((first, rest)) if first.starts_with("# generated") => rest,
        _ => text,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Log-log line plot. Non-positive values cannot be placed and are skipped.
pub fn render_svg(plot: &Plot) -> String {
    let (w, h, margin) = (640.0, 420.0, 60.0);
    let pts: Vec<(f64, f64)> = plot
        .series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(&plot.title)).unwrap();
    if pts.is_empty() {
        writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">no positive data</text>"#, w / 2.0, h / 2.0).unwrap();
        svg.push_str("</svg>\n");
        return svg;
    }
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min).floor();
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max).ceil();
        if hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let sx = |v: f64| margin + (v - x0) / (x1 - x0) * (w - 2.0 * margin);
    let sy = |v: f64| h - margin - (v - y0) / (y1 - y0) * (h - 2.0 * margin);
    writeln!(
        svg,
        r#"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * margin,
        h - 2.0 * margin
    )
    .unwrap();
    for d in (x0 as i32)..=(x1 as i32) {
        let x = sx(d as f64);
        writeln!(svg, r#"<text x="{x}" y="{}" text-anchor="middle">1e{d}</text>"#, h - margin + 16.0).unwrap();
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = sy(d as f64);
        writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">1e{d}</text>"#, margin - 6.0, y + 4.0).unwrap();
    }
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 15.0, escape(&plot.x_label)).unwrap();
    writeln!(
        svg,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(&plot.y_label)
    )
    .unwrap();
    for (i, s) in plot.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(x.log10()), sy(y.log10())))
            .collect();
        if !path.is_empty() {
            writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" ")).unwrap();
            for p in &path {
                let (cx, cy) = p.split_once(',').expect("pair");
                writeln!(svg, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#).unwrap();
            }
        }
        let ly = margin + 16.0 * (i as f64 + 1.0);
        writeln!(
            svg,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
            w - margin - 8.0,
            escape(&s.name)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(1e-20), "0.00000000000000000001");
    }

    #[test]
    fn body_strips_timestamp() {
        assert_eq!(csv_body("# generated now\na,b\n"), "a,b\n");
        assert_eq!(csv_body("a,b\n"), "a,b\n");
    }

    #[test]
    fn svg_has_series() {
        let plot = Plot {
            title: "t".into(),
            x_label: "n".into(),
            y_label: "p".into(),
            series: vec![Series { name: "a<b".into(), points: vec![(1.0, 0.5), (10.0, 0.05), (100.0, 0.0)] }],
        };
        let svg = render_svg(&plot);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("a&lt;b"));
    }
}

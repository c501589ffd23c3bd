//! Minimal SVG renders of the plot-data series.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 40.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut f = Frame { x0: f64::INFINITY, x1: f64::NEG_INFINITY, y0: f64::INFINITY, y1: f64::NEG_INFINITY };
        for (x, y) in points {
            f.x0 = f.x0.min(x);
            f.x1 = f.x1.max(x);
            f.y0 = f.y0.min(y);
            f.y1 = f.y1.max(y);
        }
        if !(f.x0 < f.x1) {
            f.x1 = f.x0 + 1.0;
        }
        if !(f.y0 < f.y1) {
            f.y1 = f.y0 + 1.0;
        }
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn polyline(&self, points: &[(f64, f64)]) -> String {
        points.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect::<Vec<_>>().join(" ")
    }
}

fn open(title: &str, f: &Frame) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();
    writeln!(s, "<text x=\"{MARGIN}\" y=\"20\" font-size=\"14\">{title}</text>").unwrap();
    writeln!(
        s,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    )
    .unwrap();
    writeln!(s, "<text x=\"{MARGIN}\" y=\"{}\">{:.4}</text>", HEIGHT - MARGIN + 14.0, f.x0).unwrap();
    writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4}</text>", WIDTH - MARGIN, HEIGHT - MARGIN + 14.0, f.x1)
        .unwrap();
    writeln!(s, "<text x=\"2\" y=\"{}\">{:.4}</text>", HEIGHT - MARGIN, f.y0).unwrap();
    writeln!(s, "<text x=\"2\" y=\"{}\">{:.4}</text>", MARGIN + 4.0, f.y1).unwrap();
    s
}

/// One line per series, plus an optional horizontal reference line.
pub fn line_chart(title: &str, series: &[Vec<(f64, f64)>], reference: Option<f64>) -> String {
    let f = Frame::fit(
        series
            .iter()
            .flatten()
            .copied()
            .chain(reference.into_iter().flat_map(|r| series.iter().flatten().map(move |p| (p.0, r)))),
    );
    let mut s = open(title, &f);
    for (i, points) in series.iter().enumerate() {
        writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1\" points=\"{}\"/>",
            COLOURS[i % COLOURS.len()],
            f.polyline(points)
        )
        .unwrap();
    }
    if let Some(r) = reference {
        let y = f.py(r);
        writeln!(s, "<line x1=\"{MARGIN}\" x2=\"{}\" y1=\"{y:.2}\" y2=\"{y:.2}\" stroke=\"black\" stroke-dasharray=\"4 3\"/>", WIDTH - MARGIN)
            .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// A shaded (lower, upper) band with its median and an optional truth line,
/// indexed by position.
pub fn band_chart(title: &str, band: &[(f64, f64, f64)], truth: Option<&[f64]>) -> String {
    let idx = |i: usize| i as f64;
    let f = Frame::fit(
        band.iter()
            .enumerate()
            .flat_map(|(i, b)| [(idx(i), b.1), (idx(i), b.2)])
            .chain(truth.into_iter().flat_map(|t| t.iter().enumerate().map(|(i, &v)| (idx(i), v)))),
    );
    let mut s = open(title, &f);
    let mut outline: Vec<(f64, f64)> = band.iter().enumerate().map(|(i, b)| (idx(i), b.2)).collect();
    outline.extend(band.iter().enumerate().rev().map(|(i, b)| (idx(i), b.1)));
    writeln!(s, "<polygon fill=\"#1f77b4\" fill-opacity=\"0.25\" stroke=\"none\" points=\"{}\"/>", f.polyline(&outline))
        .unwrap();
    let med: Vec<(f64, f64)> = band.iter().enumerate().map(|(i, b)| (idx(i), b.0)).collect();
    writeln!(s, "<polyline fill=\"none\" stroke=\"#1f77b4\" points=\"{}\"/>", f.polyline(&med)).unwrap();
    if let Some(t) = truth {
        let pts: Vec<(f64, f64)> = t.iter().enumerate().map(|(i, &v)| (idx(i), v)).collect();
        writeln!(s, "<polyline fill=\"none\" stroke=\"black\" stroke-dasharray=\"4 3\" points=\"{}\"/>", f.polyline(&pts))
            .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

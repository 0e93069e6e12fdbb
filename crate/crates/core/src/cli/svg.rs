//! Minimal SVG writers for line charts and 2-D scatter plots.
//!
//! Output depends only on the data: fixed canvas sizes, fixed number
//! formatting and no timestamps.

use std::fmt::Write;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// One line of a chart.
pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

/// One chart of a multi-panel figure.
pub struct Panel<'a> {
    pub title: &'a str,
    pub series: Vec<Series<'a>>,
    /// Plot `log10(y)`; non-positive values are dropped.
    pub log_y: bool,
}

/// A labelled set of points for [`scatter_panels`].
pub struct Cloud<'a> {
    pub label: &'a str,
    pub points: &'a [[f64; 2]],
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn bounds<'a>(values: impl Iterator<Item = &'a f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if hi - lo < 1e-300 {
        Some((lo - 0.5, hi + 0.5))
    } else {
        Some((lo, hi))
    }
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {} {}" width="{}" height="{}" font-family="sans-serif" font-size="11">"#,
        width, height, width, height
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
}

fn axes(out: &mut String, ox: f64, oy: f64, title: &str, x: (f64, f64), y: (f64, f64), log_y: bool) {
    let (x0, y0, x1, y1) = (ox + MARGIN, oy + MARGIN, ox + PANEL_W - 10.0, oy + PANEL_H - 30.0);
    let _ = writeln!(out, r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#, fmt(x0), fmt(y0), fmt(x1 - x0), fmt(y1 - y0));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, fmt((x0 + x1) / 2.0), fmt(oy + 20.0), esc(title));
    let ylab = |v: f64| if log_y { format!("1e{v:.1}") } else { format!("{v:.3e}") };
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, fmt(x0 - 2.0), fmt(y0 + 8.0), ylab(y.1));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, fmt(x0 - 2.0), fmt(y1), ylab(y.0));
    let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, fmt(x0), fmt(y1 + 14.0), format_args!("{:.4}", x.0));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, fmt(x1), fmt(y1 + 14.0), format_args!("{:.4}", x.1));
}

struct Frame {
    ox: f64,
    oy: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, y0, x1, y1) = (self.ox + MARGIN, self.oy + MARGIN, self.ox + PANEL_W - 10.0, self.oy + PANEL_H - 30.0);
        let px = x0 + (x - self.x.0) / (self.x.1 - self.x.0) * (x1 - x0);
        let py = y1 - (y - self.y.0) / (self.y.1 - self.y.0) * (y1 - y0);
        (px, py)
    }
}

/// Panels side by side, one polyline per series.
pub fn line_panels(panels: &[Panel<'_>]) -> String {
    let mut out = String::new();
    header(&mut out, PANEL_W * panels.len().max(1) as f64, PANEL_H);
    for (p_idx, panel) in panels.iter().enumerate() {
        let tf = |v: f64| if panel.log_y { if v > 0.0 { v.log10() } else { f64::NAN } } else { v };
        let ys: Vec<Vec<f64>> = panel.series.iter().map(|s| s.y.iter().map(|v| tf(*v)).collect()).collect();
        let xb = bounds(panel.series.iter().flat_map(|s| s.x.iter())).unwrap_or((0.0, 1.0));
        let yb = bounds(ys.iter().flatten()).unwrap_or((0.0, 1.0));
        let frame = Frame { ox: PANEL_W * p_idx as f64, oy: 0.0, x: xb, y: yb };
        axes(&mut out, frame.ox, frame.oy, panel.title, xb, yb, panel.log_y);
        for (k, (s, y)) in panel.series.iter().zip(&ys).enumerate() {
            let pts: Vec<String> = s
                .x
                .iter()
                .zip(y)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(x, y)| {
                    let (px, py) = frame.map(*x, *y);
                    format!("{},{}", fmt(px), fmt(py))
                })
                .collect();
            let color = COLORS[k % COLORS.len()];
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, pts.join(" "));
            if panel.series.len() > 1 {
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                    fmt(frame.ox + MARGIN + 4.0),
                    fmt(MARGIN + 12.0 + 12.0 * k as f64),
                    esc(s.label)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// One scatter panel per snapshot. Clouds are drawn as filled circles,
/// hollow circles and crosses, in that order.
pub fn scatter_panels(titles: &[String], panels: &[Vec<Cloud<'_>>]) -> String {
    let mut out = String::new();
    header(&mut out, PANEL_W * panels.len().max(1) as f64, PANEL_H);
    // Shared limits so panels are comparable.
    let xs = panels.iter().flatten().flat_map(|c| c.points.iter().map(|p| &p[0]));
    let ys = panels.iter().flatten().flat_map(|c| c.points.iter().map(|p| &p[1]));
    let xb = bounds(xs).unwrap_or((0.0, 1.0));
    let yb = bounds(ys).unwrap_or((0.0, 1.0));
    for (p_idx, (title, clouds)) in titles.iter().zip(panels).enumerate() {
        let frame = Frame { ox: PANEL_W * p_idx as f64, oy: 0.0, x: xb, y: yb };
        axes(&mut out, frame.ox, frame.oy, title, xb, yb, false);
        for (k, cloud) in clouds.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            for p in cloud.points {
                if !(p[0].is_finite() && p[1].is_finite()) {
                    continue;
                }
                let (px, py) = frame.map(p[0], p[1]);
                let _ = match k {
                    0 => writeln!(out, r#"<circle cx="{}" cy="{}" r="2" fill="{color}"/>"#, fmt(px), fmt(py)),
                    1 => writeln!(out, r#"<circle cx="{}" cy="{}" r="2.5" fill="none" stroke="{color}"/>"#, fmt(px), fmt(py)),
                    _ => writeln!(
                        out,
                        r#"<path d="M{} {}L{} {}M{} {}L{} {}" stroke="{color}"/>"#,
                        fmt(px - 2.5),
                        fmt(py - 2.5),
                        fmt(px + 2.5),
                        fmt(py + 2.5),
                        fmt(px - 2.5),
                        fmt(py + 2.5),
                        fmt(px + 2.5),
                        fmt(py - 2.5)
                    ),
                };
            }
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                fmt(frame.ox + MARGIN + 4.0),
                fmt(MARGIN + 12.0 + 12.0 * k as f64),
                esc(cloud.label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// A path through `(x, y)` pairs with equal axis scaling, for trajectories.
pub fn trajectory(title: &str, xy: &[[f64; 2]]) -> String {
    let mut out = String::new();
    let size = PANEL_H + 80.0;
    header(&mut out, size, size);
    let m = xy
        .iter()
        .flat_map(|p| p.iter())
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, fmt(size / 2.0), esc(title));
    let c = size / 2.0;
    let scale = (size / 2.0 - 30.0) / m;
    let _ = writeln!(out, r#"<path d="M{} {}L{} {}M{} {}L{} {}" stroke="gray" stroke-width="0.5"/>"#, 10, fmt(c), fmt(size - 10.0), fmt(c), fmt(c), 30, fmt(c), fmt(size - 10.0));
    let pts: Vec<String> = xy
        .iter()
        .filter(|p| p[0].is_finite() && p[1].is_finite())
        .map(|p| format!("{},{}", fmt(c + p[0] * scale), fmt(c - p[1] * scale)))
        .collect();
    let _ = writeln!(out, r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#, COLORS[0], pts.join(" "));
    let _ = writeln!(out, r#"<circle cx="{}" cy="{}" r="3" fill="{}"/>"#, fmt(c), fmt(c), COLORS[1]);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_deterministic_and_well_formed() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 0.5, f64::NAN];
        let make = || line_panels(&[Panel { title: "a<b", series: vec![Series { label: "s", x: &x, y: &y }], log_y: true }]);
        let s = make();
        assert_eq!(s, make());
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a&lt;b"));
        assert_eq!(s.matches("<polyline").count(), 1);
    }

    #[test]
    fn scatter_marks_every_point() {
        let a = [[0.0, 0.0], [1.0, 1.0]];
        let b = [[2.0, 0.0]];
        let s = scatter_panels(&["t".into()], &[vec![Cloud { label: "A", points: &a }, Cloud { label: "B", points: &b }]]);
        assert_eq!(s.matches("<circle").count(), 3);
    }
}

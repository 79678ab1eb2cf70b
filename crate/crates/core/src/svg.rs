//! Self-contained SVG rendering for coverage maps, heatmaps and plots.

use std::fmt::Write;

use crate::coverage::{disk_polygon_boundary, is_covered, BoundaryPiece, CoverageConfig, Point, Rect, VoronoiDiagram};
use crate::ensemble::UncertaintyField;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Marker style for a layer of points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Dot,
    Ring,
    Cross,
}

#[derive(Debug, Clone)]
pub struct PointLayer {
    pub label: String,
    pub points: Vec<Point>,
    pub marker: Marker,
    pub color: &'static str,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Maps a world rectangle onto the plotting area, y pointing up.
struct Frame {
    world: Rect,
}

impl Frame {
    fn new(world: Rect) -> Self {
        let pad = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let (x_min, x_max) = pad(world.x_min, world.x_max);
        let (y_min, y_max) = pad(world.y_min, world.y_max);
        Self {
            world: Rect::new(x_min, y_min, x_max, y_max),
        }
    }

    fn x(&self, x: f64) -> f64 {
        MARGIN + (x - self.world.x_min) / self.world.width() * SIZE
    }

    fn y(&self, y: f64) -> f64 {
        MARGIN + (self.world.y_max - y) / self.world.height() * SIZE
    }

    fn scale(&self) -> f64 {
        SIZE / self.world.width()
    }

    fn open(&self, title: &str) -> String {
        let total = SIZE + 2.0 * MARGIN;
        let mut s = format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total}\" height=\"{total}\" viewBox=\"0 0 {total} {total}\">\n"
        );
        let _ = writeln!(s, "<rect width=\"{total}\" height=\"{total}\" fill=\"white\"/>");
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
            total / 2.0,
            MARGIN / 2.0,
            escape(title)
        );
        s
    }

    fn axes(&self, s: &mut String, x_label: &str, y_label: &str) {
        let w = self.world;
        let _ = writeln!(
            s,
            "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"none\" stroke=\"black\"/>"
        );
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = w.x_min + t * w.width();
            let yv = w.y_min + t * w.height();
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                self.x(xv),
                MARGIN + SIZE + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                MARGIN - 6.0,
                self.y(yv) + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>",
            MARGIN + SIZE / 2.0,
            MARGIN + SIZE + 40.0,
            escape(x_label)
        );
        let _ = writeln!(
            s,
            "<text transform=\"translate({:.2},{:.2}) rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>",
            16.0,
            MARGIN + SIZE / 2.0,
            escape(y_label)
        );
    }

    fn legend(&self, s: &mut String, entries: &[(&str, &str)]) {
        for (i, (label, color)) in entries.iter().enumerate() {
            let y = MARGIN + 14.0 + 18.0 * i as f64;
            let x = MARGIN + SIZE - 150.0;
            let _ = writeln!(
                s,
                "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{color}\"/>",
                y - 10.0
            );
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{y:.2}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
                x + 18.0,
                escape(label)
            );
        }
    }

    fn marker(&self, s: &mut String, p: Point, marker: Marker, color: &str) {
        let (x, y) = (self.x(p.x), self.y(p.y));
        match marker {
            Marker::Dot => {
                let _ = writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"1.6\" fill=\"{color}\"/>");
            }
            Marker::Ring => {
                let _ = writeln!(
                    s,
                    "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"/>"
                );
            }
            Marker::Cross => {
                let _ = writeln!(
                    s,
                    "<path d=\"M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}\" stroke=\"{color}\" stroke-width=\"2.5\"/>",
                    x - 6.0,
                    y - 6.0,
                    x + 6.0,
                    y + 6.0,
                    x - 6.0,
                    y + 6.0,
                    x + 6.0,
                    y - 6.0
                );
            }
        }
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

/// Covered region (disk-cell intersections of a Voronoi diagram) under
/// point layers.
pub fn coverage_map(diagram: &VoronoiDiagram, rho: f64, layers: &[PointLayer], title: &str) -> String {
    let frame = Frame::new(diagram.bounds());
    let mut s = frame.open(title);
    let r = rho * frame.scale();
    let mut d = String::new();
    for (site, cell) in diagram.sites().iter().zip(diagram.cells()) {
        let pieces = disk_polygon_boundary(*site, rho, cell);
        let Some(first) = pieces.first() else { continue };
        let start = match *first {
            BoundaryPiece::Line { from, .. } | BoundaryPiece::Arc { from, .. } => from,
        };
        let _ = write!(d, "M{:.2},{:.2}", frame.x(start.x), frame.y(start.y));
        for piece in pieces {
            match piece {
                BoundaryPiece::Line { to, .. } => {
                    let _ = write!(d, "L{:.2},{:.2}", frame.x(to.x), frame.y(to.y));
                }
                BoundaryPiece::Arc { to, angle, .. } => {
                    let sweep = if angle > 0.0 { 0 } else { 1 };
                    let _ = write!(
                        d,
                        "A{r:.2},{r:.2} 0 0 {sweep} {:.2},{:.2}",
                        frame.x(to.x),
                        frame.y(to.y)
                    );
                }
            }
        }
        d.push('Z');
    }
    let _ = writeln!(
        s,
        "<path d=\"{d}\" fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\"/>"
    );
    frame.axes(&mut s, "property 1 (standardized)", "property 2 (standardized)");
    for layer in layers {
        for p in &layer.points {
            frame.marker(&mut s, *p, layer.marker, layer.color);
        }
    }
    let mut legend: Vec<(&str, &str)> = vec![("covered region", "#9ecae1")];
    legend.extend(layers.iter().map(|l| (l.label.as_str(), l.color)));
    frame.legend(&mut s, &legend);
    s.push_str("</svg>\n");
    s
}

/// Covered region sampled on a raster of pitch `rho / 4`, for any `k`.
pub fn raster_coverage_map(points: &[Point], config: &CoverageConfig, layers: &[PointLayer], title: &str) -> String {
    let b = config.bounds;
    let frame = Frame::new(b);
    let mut s = frame.open(title);
    let h = config.rho / 4.0;
    let nx = (b.width() / h).ceil() as usize;
    let ny = (b.height() / h).ceil() as usize;
    let mut d = String::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let c = Point::new(b.x_min + (ix as f64 + 0.5) * h, b.y_min + (iy as f64 + 0.5) * h);
            if is_covered(c, points, config.rho, config.k) {
                let _ = write!(
                    d,
                    "M{:.2},{:.2}h{:.2}v{:.2}h{:.2}Z",
                    frame.x(c.x - h / 2.0),
                    frame.y(c.y + h / 2.0),
                    h * frame.scale(),
                    h * frame.scale(),
                    -h * frame.scale()
                );
            }
        }
    }
    let _ = writeln!(
        s,
        "<path d=\"{d}\" fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\"/>"
    );
    frame.axes(&mut s, "property 1 (standardized)", "property 2 (standardized)");
    for layer in layers {
        for p in &layer.points {
            frame.marker(&mut s, *p, layer.marker, layer.color);
        }
    }
    let mut legend: Vec<(&str, &str)> = vec![("covered region", "#9ecae1")];
    legend.extend(layers.iter().map(|l| (l.label.as_str(), l.color)));
    frame.legend(&mut s, &legend);
    s.push_str("</svg>\n");
    s
}

/// Linear white-to-red ramp.
fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let g = (255.0 * (1.0 - t)).round() as u8;
    format!("#ff{g:02x}{g:02x}")
}

pub fn heatmap(field: &UncertaintyField, title: &str) -> String {
    let frame = Frame::new(field.bounds);
    let mut s = frame.open(title);
    let (lo, hi) = (field.min(), field.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = field.resolution;
    let dx = field.bounds.width() / (n - 1) as f64;
    let dy = field.bounds.height() / (n - 1) as f64;
    for iy in 0..n {
        for ix in 0..n {
            let c = field.coordinate(ix, iy);
            let x0 = (c.x - dx / 2.0).max(field.bounds.x_min);
            let x1 = (c.x + dx / 2.0).min(field.bounds.x_max);
            let y0 = (c.y - dy / 2.0).max(field.bounds.y_min);
            let y1 = (c.y + dy / 2.0).min(field.bounds.y_max);
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                frame.x(x0),
                frame.y(y1),
                frame.x(x1) - frame.x(x0),
                frame.y(y0) - frame.y(y1),
                ramp((field.value(ix, iy) - lo) / span)
            );
        }
    }
    frame.axes(&mut s, "property 1 (standardized)", "property 2 (standardized)");
    frame.legend(
        &mut s,
        &[
            (&format!("min {}", tick(lo)), "#ffffff"),
            (&format!("max {}", tick(hi)), "#ff0000"),
        ],
    );
    s.push_str("</svg>\n");
    s
}

fn extent(series: &[Series], zero_based: bool) -> Rect {
    let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (x, y) in series.iter().flat_map(|s| s.points.iter().copied()) {
        if x.is_finite() && y.is_finite() {
            r = Rect::new(r.x_min.min(x), r.y_min.min(y), r.x_max.max(x), r.y_max.max(y));
        }
    }
    if !r.x_min.is_finite() {
        return Rect::new(0.0, 0.0, 1.0, 1.0);
    }
    if zero_based {
        r = Rect::new(r.x_min.min(0.0), r.y_min.min(0.0), r.x_max, r.y_max);
    }
    let pad_y = 0.05 * (r.y_max - r.y_min).max(1e-9);
    Rect::new(r.x_min, r.y_min - pad_y, r.x_max, r.y_max + pad_y)
}

pub fn line_plot(series: &[Series], title: &str, x_label: &str, y_label: &str) -> String {
    let frame = Frame::new(extent(series, false));
    let mut s = frame.open(title);
    frame.axes(&mut s, x_label, y_label);
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            pts.join(" ")
        );
        for &(x, y) in &ser.points {
            frame.marker(&mut s, Point::new(x, y), Marker::Ring, color);
        }
    }
    let legend: Vec<(&str, &str)> = series
        .iter()
        .enumerate()
        .map(|(i, ser)| (ser.label.as_str(), PALETTE[i % PALETTE.len()]))
        .collect();
    frame.legend(&mut s, &legend);
    s.push_str("</svg>\n");
    s
}

pub fn scatter(series: &[Series], title: &str, x_label: &str, y_label: &str) -> String {
    let frame = Frame::new(extent(series, true));
    let mut s = frame.open(title);
    frame.axes(&mut s, x_label, y_label);
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(x, y) in &ser.points {
            frame.marker(&mut s, Point::new(x, y), Marker::Ring, color);
        }
    }
    let legend: Vec<(&str, &str)> = series
        .iter()
        .enumerate()
        .map(|(i, ser)| (ser.label.as_str(), PALETTE[i % PALETTE.len()]))
        .collect();
    frame.legend(&mut s, &legend);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(s: &str) -> bool {
        s.matches("<svg").count() == 1 && s.trim_end().ends_with("</svg>") && !s.contains("NaN")
    }

    #[test]
    fn coverage_map_draws_one_subpath_per_covered_cell() {
        let pts = [Point::new(0.0, 0.0), Point::new(0.1, 0.0), Point::new(3.0, 3.0)];
        let d = VoronoiDiagram::build(&pts, Rect::new(-2.0, -2.0, 4.0, 4.0)).unwrap();
        let layer = PointLayer {
            label: "data".into(),
            points: pts.to_vec(),
            marker: Marker::Dot,
            color: "black",
        };
        let svg = coverage_map(&d, 0.08, &[layer], "map");
        assert!(balanced(&svg));
        assert_eq!(svg.matches('Z').count(), 3);
        assert!(svg.contains('A'));
    }

    #[test]
    fn plots_are_well_formed() {
        let series = vec![
            Series {
                label: "a<b".into(),
                points: vec![(1.0, 2.0), (2.0, 3.0)],
            },
            Series {
                label: "flat".into(),
                points: vec![(1.0, 1.0)],
            },
        ];
        let line = line_plot(&series, "t", "x", "y");
        assert!(balanced(&line));
        assert!(line.contains("a&lt;b"));
        assert!(balanced(&scatter(&series, "t", "x", "y")));
        assert!(balanced(&line_plot(&[], "empty", "x", "y")));
    }
}

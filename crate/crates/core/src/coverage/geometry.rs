//! Planar primitives: points, rectangles, convex polygons and exact
//! disk–polygon intersection.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn dist2(self, o: Point) -> f64 {
        (self - o).norm2()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point::new(x, y)
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub const fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_valid(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.width() > 0.0
            && self.height() > 0.0
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Shrinks every side by `margin`.
    pub fn inset(&self, margin: f64) -> Rect {
        Rect::new(
            self.x_min + margin,
            self.y_min + margin,
            self.x_max - margin,
            self.y_max - margin,
        )
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn to_polygon(&self) -> ConvexPolygon {
        ConvexPolygon {
            vertices: vec![
                Point::new(self.x_min, self.y_min),
                Point::new(self.x_max, self.y_min),
                Point::new(self.x_max, self.y_max),
                Point::new(self.x_min, self.y_max),
            ],
            edges: vec![EdgeSource::Boundary; 4],
        }
    }
}

/// What produced a polygon edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSource {
    Boundary,
    /// Perpendicular bisector shared with the given site.
    Bisector(usize),
}

/// Counter-clockwise convex polygon. Edge `i` runs from vertex `i` to vertex
/// `i + 1` (cyclically).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
    edges: Vec<EdgeSource>,
}

impl ConvexPolygon {
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edge_sources(&self) -> &[EdgeSource] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n]))
            .sum::<f64>()
    }

    /// Keeps the part where `(q - anchor) . normal <= 0`; the new edge is
    /// tagged with `source`.
    pub fn clip(&self, anchor: Point, normal: Point, source: EdgeSource) -> ConvexPolygon {
        let n = self.vertices.len();
        if n == 0 {
            return self.clone();
        }
        let side: Vec<f64> = self.vertices.iter().map(|&v| (v - anchor).dot(normal)).collect();
        // Tolerance scaled to the polygon so that vertices lying on the line
        // are kept rather than duplicated.
        let scale = self.vertices.iter().map(|v| (*v - anchor).norm()).fold(0.0, f64::max) * normal.norm();
        let tol = 1e-12 * scale;
        if side.iter().all(|&s| s <= tol) {
            return self.clone();
        }
        if side.iter().all(|&s| s > tol) {
            return ConvexPolygon::default();
        }
        let mut vertices = Vec::with_capacity(n + 1);
        let mut edges = Vec::with_capacity(n + 1);
        for i in 0..n {
            let j = (i + 1) % n;
            let (a, b) = (self.vertices[i], self.vertices[j]);
            let (sa, sb) = (side[i], side[j]);
            let a_in = sa <= tol;
            let b_in = sb <= tol;
            if a_in {
                vertices.push(a);
                edges.push(self.edges[i]);
            }
            if a_in != b_in {
                let t = sa / (sa - sb);
                let x = a + (b - a) * t.clamp(0.0, 1.0);
                vertices.push(x);
                // Leaving the kept side: the next edge runs along the cut.
                edges.push(if a_in { source } else { self.edges[i] });
            }
        }
        let mut poly = ConvexPolygon { vertices, edges };
        poly.drop_degenerate_vertices(tol.max(f64::MIN_POSITIVE));
        poly
    }

    fn drop_degenerate_vertices(&mut self, tol: f64) {
        let mut i = 0;
        while self.vertices.len() > 1 && i < self.vertices.len() {
            let j = (i + 1) % self.vertices.len();
            if self.vertices[i].dist(self.vertices[j]) <= tol {
                // Edge i collapsed; keep the outgoing edge of vertex j.
                self.vertices.remove(i);
                self.edges.remove(i);
            } else {
                i += 1;
            }
        }
        if self.vertices.len() < 3 {
            self.vertices.clear();
            self.edges.clear();
        }
    }
}

/// One piece of the boundary of a disk–polygon intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryPiece {
    /// Straight segment between two points inside the disk.
    Line { from: Point, to: Point },
    /// Circular arc of the disk from `from` to `to`, sweeping `angle`
    /// radians (positive = counter-clockwise).
    Arc { from: Point, to: Point, angle: f64 },
}

fn segment_pieces(center: Point, radius: f64, a: Point, b: Point, out: &mut Vec<BoundaryPiece>) {
    let (pa, pb) = (a - center, b - center);
    let d = pb - pa;
    let qa = d.norm2();
    let mut cuts = vec![0.0];
    if qa > 0.0 {
        let qb = pa.dot(d);
        let qc = pa.norm2() - radius * radius;
        let disc = qb * qb - qa * qc;
        if disc > 0.0 {
            let root = disc.sqrt();
            // Numerically stable quadratic roots.
            let q = -(qb + qb.signum() * root);
            let (mut t1, mut t2) = if q != 0.0 {
                (q / qa, qc / q)
            } else {
                (-root / qa, root / qa)
            };
            if t1 > t2 {
                std::mem::swap(&mut t1, &mut t2);
            }
            for t in [t1, t2] {
                if t > 0.0 && t < 1.0 {
                    cuts.push(t);
                }
            }
        }
    }
    cuts.push(1.0);
    for w in cuts.windows(2) {
        let p = pa + d * w[0];
        let q = pa + d * w[1];
        let mid = pa + d * (0.5 * (w[0] + w[1]));
        if mid.norm2() <= radius * radius {
            out.push(BoundaryPiece::Line {
                from: center + p,
                to: center + q,
            });
        } else {
            let angle = p.cross(q).atan2(p.dot(q));
            let project = |v: Point| {
                let n = v.norm();
                if n > 0.0 {
                    center + v * (radius / n)
                } else {
                    center
                }
            };
            out.push(BoundaryPiece::Arc {
                from: project(p),
                to: project(q),
                angle,
            });
        }
    }
}

/// Boundary of `disk(center, radius) ∩ polygon`, traced along the polygon.
///
/// Parts of polygon edges inside the disk are kept as lines; parts outside
/// are replaced by the arc between the radial projections of their ends.
pub fn disk_polygon_boundary(center: Point, radius: f64, polygon: &ConvexPolygon) -> Vec<BoundaryPiece> {
    let v = polygon.vertices();
    let mut out = Vec::new();
    if polygon.is_empty() {
        return out;
    }
    for i in 0..v.len() {
        segment_pieces(center, radius, v[i], v[(i + 1) % v.len()], &mut out);
    }
    out
}

/// Exact area of `disk(center, radius) ∩ polygon` in closed form.
///
/// Sums, over polygon edges, the signed area of the disk intersected with the
/// triangle (center, edge start, edge end): triangle terms where the edge is
/// inside the disk and circular-sector terms where it is outside. The center
/// need not lie inside the polygon.
pub fn disk_polygon_area(center: Point, radius: f64, polygon: &ConvexPolygon) -> f64 {
    let area: f64 = disk_polygon_boundary(center, radius, polygon)
        .iter()
        .map(|piece| match *piece {
            BoundaryPiece::Line { from, to } => 0.5 * (from - center).cross(to - center),
            BoundaryPiece::Arc { angle, .. } => 0.5 * radius * radius * angle,
        })
        .sum();
    area.clamp(0.0, PI * radius * radius)
}

/// Area of the lens formed by two radius-`r` disks whose centers are `d`
/// apart.
pub fn lens_area(r: f64, d: f64) -> f64 {
    if d >= 2.0 * r {
        return 0.0;
    }
    2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt()
}

//! Data coverage of a 2-D standardized property space.
//!
//! A query point is covered when at least `k` dataset points lie within
//! Euclidean distance `rho` of it. The coverage score is the area of the
//! covered region inside a fixed domain box. For `k = 1` the area is computed
//! exactly: the Voronoi cell of each site is intersected with the site's
//! radius-`rho` disk, so overlapping disks are never double counted. A
//! raster estimator handles any `k` and doubles as an independent check.

mod geometry;
mod raster;
mod voronoi;

use serde::{Deserialize, Serialize};

pub use geometry::{
    disk_polygon_area, disk_polygon_boundary, lens_area, BoundaryPiece, ConvexPolygon, EdgeSource, Point, Rect,
};
pub use voronoi::{dedup_sites, VoronoiDiagram, MERGE_DISTANCE};

use crate::error::{Error, Result};
use crate::problem::Dataset;

/// Raster pitch used for `k >= 2`, as a fraction of `rho`.
pub const RASTER_PITCH_FRACTION: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageConfig {
    /// Vicinity radius in standardized property units.
    pub rho: f64,
    /// Number of points that must lie within `rho`.
    pub k: usize,
    #[serde(rename = "box")]
    pub bounds: Rect,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            rho: 0.08,
            k: 1,
            bounds: Rect::new(-2.0, -2.0, 4.0, 4.0),
        }
    }
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("rho must be > 0, got {}", self.rho)));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if !self.bounds.is_valid() {
            return Err(Error::InvalidConfig(format!(
                "coverage box must have positive area: {:?}",
                self.bounds
            )));
        }
        Ok(())
    }

    pub fn disk_area(&self) -> f64 {
        std::f64::consts::PI * self.rho * self.rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageMethod {
    Exact,
    Raster,
}

impl CoverageMethod {
    pub fn label(&self) -> &'static str {
        match self {
            CoverageMethod::Exact => "exact",
            CoverageMethod::Raster => "raster",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    /// Covered area inside the box, in squared standardized units.
    pub score: f64,
    /// Covered area per Voronoi cell (exact method only, aligned with the
    /// diagram's deduplicated sites).
    pub per_cell_area: Vec<f64>,
    pub method: CoverageMethod,
}

/// Whether `q` has at least `k` points within distance `rho` (inclusive).
pub fn is_covered(q: Point, points: &[Point], rho: f64, k: usize) -> bool {
    let rho2 = rho * rho;
    points.iter().filter(|p| p.dist2(q) <= rho2).take(k).count() >= k
}

/// Builds the clipped Voronoi diagram of `points`.
pub fn build_voronoi(points: &[Point], bounds: Rect) -> Result<VoronoiDiagram> {
    VoronoiDiagram::build(points, bounds)
}

/// Exact covered area for `k = 1`, also returning the diagram it used.
pub fn covered_region_exact(points: &[Point], config: &CoverageConfig) -> Result<(VoronoiDiagram, CoverageReport)> {
    config.validate()?;
    if config.k != 1 {
        return Err(Error::Unsupported(format!(
            "exact covered area needs k = 1 (got k = {}); use the raster estimator",
            config.k
        )));
    }
    let diagram = VoronoiDiagram::build(points, config.bounds)?;
    let per_cell_area: Vec<f64> = diagram
        .sites()
        .iter()
        .zip(diagram.cells())
        .map(|(&site, cell)| disk_polygon_area(site, config.rho, cell))
        .collect();
    let score = per_cell_area.iter().sum::<f64>().clamp(0.0, config.bounds.area());
    Ok((
        diagram,
        CoverageReport {
            score,
            per_cell_area,
            method: CoverageMethod::Exact,
        },
    ))
}

/// Exact area of `(union of radius-rho disks) ∩ box` for `k = 1`.
pub fn covered_area_exact(points: &[Point], config: &CoverageConfig) -> Result<CoverageReport> {
    covered_region_exact(points, config).map(|(_, report)| report)
}

/// Raster estimate: number of pitch-`h` cell centers that are covered, times
/// `h^2`. Valid for any `k`.
pub fn covered_area_raster(points: &[Point], config: &CoverageConfig, h: f64) -> Result<CoverageReport> {
    config.validate()?;
    let count = raster::covered_cell_count(points, config.bounds, config.rho, config.k, h)?;
    Ok(CoverageReport {
        score: count as f64 * h * h,
        per_cell_area: Vec::new(),
        method: CoverageMethod::Raster,
    })
}

/// Covered area of a point set: exact when `k = 1`, raster otherwise.
pub fn coverage_report(points: &[Point], config: &CoverageConfig) -> Result<CoverageReport> {
    if config.k == 1 {
        covered_area_exact(points, config)
    } else {
        covered_area_raster(points, config, config.rho * RASTER_PITCH_FRACTION)
    }
}

fn dataset_points(dataset: &Dataset) -> Result<Vec<Point>> {
    let pts: Vec<Point> = dataset.property_points()?.into_iter().map(Point::from).collect();
    if pts.is_empty() {
        return Err(Error::Domain("dataset has no feasible records".into()));
    }
    Ok(pts)
}

/// Coverage score of the dataset's feasible standardized properties.
pub fn coverage_score(dataset: &Dataset, config: &CoverageConfig) -> Result<f64> {
    coverage_report(&dataset_points(dataset)?, config).map(|r| r.score)
}

/// Increase in coverage score from adding `candidates` to the dataset.
pub fn coverage_gain(dataset: &Dataset, candidates: &[Point], config: &CoverageConfig) -> Result<f64> {
    if let Some(c) = candidates.iter().find(|c| !config.bounds.contains(**c)) {
        return Err(Error::Domain(format!("candidate {c:?} lies outside the coverage box")));
    }
    let mut points = dataset_points(dataset)?;
    let before = coverage_report(&points, config)?.score;
    points.extend_from_slice(candidates);
    let after = coverage_report(&points, config)?.score;
    Ok((after - before).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg() -> CoverageConfig {
        CoverageConfig::default()
    }

    #[test]
    fn pointwise_coverage() {
        let p = [Point::new(0.0, 0.0)];
        assert!(is_covered(Point::new(0.05, 0.0), &p, 0.08, 1));
        assert!(!is_covered(Point::new(0.09, 0.0), &p, 0.08, 1));
        let two = [Point::new(-0.08, 0.0), Point::new(0.08, 0.0)];
        assert!(is_covered(Point::new(0.0, 0.0), &two, 0.08, 2));
    }

    #[test]
    fn exact_trivial_cases() {
        let c = cfg();
        let one = covered_area_exact(&[c.bounds.center()], &c).unwrap().score;
        assert!((one - PI * 0.0064).abs() < 1e-9);
        assert!((one - 0.020_106_193).abs() < 1e-9);

        let two = covered_area_exact(&[Point::new(0.0, 0.0), Point::new(0.16, 0.0)], &c).unwrap();
        assert!((two.score - 2.0 * PI * 0.0064).abs() < 1e-9);
        assert_eq!(two.per_cell_area.len(), 2);

        let dup = covered_area_exact(&[Point::new(0.5, 0.5), Point::new(0.5, 0.5)], &c).unwrap();
        assert!((dup.score - PI * 0.0064).abs() < 1e-9);
    }

    #[test]
    fn exact_rejects_higher_order() {
        let c = CoverageConfig { k: 2, ..cfg() };
        let err = covered_area_exact(&[Point::new(0.0, 0.0)], &c);
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn disk_clipped_by_box_edge() {
        let c = cfg();
        let s = covered_area_exact(&[Point::new(-2.0, 1.0)], &c).unwrap().score;
        assert!((s - 0.5 * c.disk_area()).abs() < 1e-12);
    }

    #[test]
    fn raster_cases() {
        let c = cfg();
        let r = covered_area_raster(&[Point::new(0.3, 0.7)], &c, 0.002).unwrap();
        assert!((r.score - c.disk_area()).abs() < 1e-3);
        assert_eq!(r.method, CoverageMethod::Raster);

        let k2 = CoverageConfig { k: 2, ..c };
        let far = covered_area_raster(&[Point::new(0.0, 0.0), Point::new(0.5, 0.0)], &k2, 0.002).unwrap();
        assert_eq!(far.score, 0.0);
        let same = covered_area_raster(&[Point::new(0.0, 0.0), Point::new(0.0, 0.0)], &k2, 0.002).unwrap();
        assert!((same.score - c.disk_area()).abs() < 1e-3);
    }

    #[test]
    fn dispatch_follows_k() {
        let pts = [Point::new(0.0, 0.0)];
        assert_eq!(coverage_report(&pts, &cfg()).unwrap().method, CoverageMethod::Exact);
        let k2 = CoverageConfig { k: 2, ..cfg() };
        assert_eq!(coverage_report(&pts, &k2).unwrap().method, CoverageMethod::Raster);
    }

    #[test]
    fn config_validation() {
        assert!(CoverageConfig { rho: 0.0, ..cfg() }.validate().is_err());
        assert!(CoverageConfig { k: 0, ..cfg() }.validate().is_err());
        assert!(CoverageConfig {
            bounds: Rect::new(0.0, 0.0, 0.0, 1.0),
            ..cfg()
        }
        .validate()
        .is_err());
    }
}

//! First-order Voronoi diagrams clipped to a rectangle.
//!
//! Cells are obtained as the box intersected with the bisector half-planes of
//! each site's Delaunay neighbors. The Delaunay triangulation (robust
//! predicates, `O(n log n)` bulk loading) comes from `spade`.

use spade::{DelaunayTriangulation, HasPosition, Point2, Triangulation};

use super::geometry::{ConvexPolygon, EdgeSource, Point, Rect};
use crate::error::{Error, Result};

/// Sites closer than this are merged before construction.
pub const MERGE_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiDiagram {
    bounds: Rect,
    sites: Vec<Point>,
    cells: Vec<ConvexPolygon>,
    adjacency: Vec<(usize, usize)>,
}

struct Site {
    index: usize,
    position: Point2<f64>,
}

impl HasPosition for Site {
    type Scalar = f64;

    fn position(&self) -> Point2<f64> {
        self.position
    }
}

/// Removes exact and near duplicates (distance below [`MERGE_DISTANCE`]),
/// keeping the first occurrence in lexicographic order.
pub fn dedup_sites(points: &[Point]) -> Vec<Point> {
    let mut sorted: Vec<Point> = points.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut kept: Vec<Point> = Vec::with_capacity(sorted.len());
    for p in sorted {
        let duplicate = kept
            .iter()
            .rev()
            .take_while(|k| k.x >= p.x - MERGE_DISTANCE)
            .any(|k| k.dist(p) < MERGE_DISTANCE);
        if !duplicate {
            kept.push(p);
        }
    }
    kept
}

impl VoronoiDiagram {
    /// Builds the diagram of `points` restricted to `bounds`.
    ///
    /// Sites outside the box are kept: their cells may still reach into it.
    /// At least one site must lie inside the box.
    pub fn build(points: &[Point], bounds: Rect) -> Result<Self> {
        if !bounds.is_valid() {
            return Err(Error::InvalidConfig(format!("degenerate box {bounds:?}")));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::Domain(format!("non-finite site {p:?}")));
        }
        let sites = dedup_sites(points);
        if !sites.iter().any(|&p| bounds.contains(p)) {
            return Err(Error::Domain("no site lies inside the domain box".into()));
        }
        let box_poly = bounds.to_polygon();
        if sites.len() == 1 {
            return Ok(Self {
                bounds,
                sites,
                cells: vec![box_poly],
                adjacency: Vec::new(),
            });
        }

        let vertices: Vec<Site> = sites
            .iter()
            .enumerate()
            .map(|(index, p)| Site {
                index,
                position: Point2::new(p.x, p.y),
            })
            .collect();
        let triangulation = DelaunayTriangulation::<Site>::bulk_load(vertices)
            .map_err(|e| Error::Domain(format!("triangulation rejected a site: {e:?}")))?;

        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); sites.len()];
        for v in triangulation.vertices() {
            let i = v.data().index;
            neighbors[i].extend(v.out_edges().map(|e| e.to().data().index));
        }

        let cells: Vec<ConvexPolygon> = sites
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                neighbors[i].iter().fold(box_poly.clone(), |cell, &j| {
                    let t = sites[j];
                    let mid = (s + t) * 0.5;
                    cell.clip(mid, t - s, EdgeSource::Bisector(j))
                })
            })
            .collect();

        let mut adjacency: Vec<(usize, usize)> = cells
            .iter()
            .enumerate()
            .flat_map(|(i, c)| {
                c.edge_sources().iter().filter_map(move |e| match *e {
                    EdgeSource::Bisector(j) => Some((i.min(j), i.max(j))),
                    EdgeSource::Boundary => None,
                })
            })
            .collect();
        adjacency.sort_unstable();
        adjacency.dedup();

        Ok(Self {
            bounds,
            sites,
            cells,
            adjacency,
        })
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    /// Deduplicated sites; `cells()[i]` belongs to `sites()[i]`.
    pub fn sites(&self) -> &[Point] {
        &self.sites
    }

    pub fn cells(&self) -> &[ConvexPolygon] {
        &self.cells
    }

    /// Pairs `(i, j)`, `i < j`, whose clipped cells share an edge.
    pub fn adjacency(&self) -> &[(usize, usize)] {
        &self.adjacency
    }

    pub fn total_cell_area(&self) -> f64 {
        self.cells.iter().map(ConvexPolygon::area).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const BOX: Rect = Rect::new(-2.0, -2.0, 4.0, 4.0);

    #[test]
    fn single_site_owns_the_box() {
        let d = VoronoiDiagram::build(&[Point::new(0.3, 0.1)], BOX).unwrap();
        assert_eq!(d.cells().len(), 1);
        assert_eq!(d.cells()[0].area(), 36.0);
    }

    #[test]
    fn mirrored_pair_splits_evenly() {
        let c = BOX.center();
        let pts = [c + Point::new(-0.7, 0.4), c + Point::new(0.7, -0.4)];
        let d = VoronoiDiagram::build(&pts, BOX).unwrap();
        let (a0, a1) = (d.cells()[0].area(), d.cells()[1].area());
        assert!((a0 - 18.0).abs() < 1e-12 && (a1 - 18.0).abs() < 1e-12);
        assert_eq!(d.adjacency(), &[(0, 1)]);
    }

    #[test]
    fn collinear_sites_give_parallel_strips() {
        let pts = [Point::new(0.0, 1.0), Point::new(1.0, 1.0), Point::new(2.0, 1.0)];
        let d = VoronoiDiagram::build(&pts, BOX).unwrap();
        let middle = &d.cells()[1];
        let xs: Vec<f64> = middle.vertices().iter().map(|v| v.x).collect();
        assert!(xs.iter().all(|&x| (x - 0.5).abs() < 1e-12 || (x - 1.5).abs() < 1e-12));
        assert!((middle.area() - 6.0).abs() < 1e-12);
        assert_eq!(d.adjacency(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn duplicates_are_merged() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(0.0, 0.0),
            Point::new(0.0, 1e-12),
            Point::new(1.0, 0.0),
        ];
        let d = VoronoiDiagram::build(&pts, BOX).unwrap();
        assert_eq!(d.sites().len(), 2);
    }

    #[test]
    fn all_sites_outside_is_a_domain_error() {
        let err = VoronoiDiagram::build(&[Point::new(10.0, 10.0)], BOX);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn cells_tile_the_box_for_1000_random_sites() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let pts: Vec<Point> = (0..1000)
                .map(|_| Point::new(rng.random_range(-2.5..4.5), rng.random_range(-2.5..4.5)))
                .collect();
            let d = VoronoiDiagram::build(&pts, BOX).unwrap();
            assert!((d.total_cell_area() - 36.0).abs() <= 1e-9 * 36.0);
        }
    }

    #[test]
    fn cell_interiors_are_nearest_to_their_site() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Point> = (0..300)
            .map(|_| Point::new(rng.random_range(-2.0..4.0), rng.random_range(-2.0..4.0)))
            .collect();
        let d = VoronoiDiagram::build(&pts, BOX).unwrap();
        for (i, cell) in d.cells().iter().enumerate() {
            if cell.is_empty() {
                continue;
            }
            let v = cell.vertices();
            let centroid = v.iter().fold(Point::default(), |acc, &p| acc + p) * (1.0 / v.len() as f64);
            let own = centroid.dist2(d.sites()[i]);
            assert!(d.sites().iter().all(|s| centroid.dist2(*s) >= own - 1e-12));
        }
    }

    proptest! {
        #[test]
        fn tiling_holds_for_clustered_and_grid_like_inputs(
            raw in prop::collection::vec((0i32..40, 0i32..40), 2..300),
            jitter in 0.0f64..1e-6,
        ) {
            let pts: Vec<Point> = raw
                .iter()
                .enumerate()
                .map(|(k, &(a, b))| Point::new(
                    -1.0 + a as f64 * 0.1 + jitter * (k % 3) as f64,
                    -1.0 + b as f64 * 0.1,
                ))
                .collect();
            let d = VoronoiDiagram::build(&pts, BOX).unwrap();
            prop_assert!((d.total_cell_area() - 36.0).abs() <= 1e-9 * 36.0);
        }
    }
}

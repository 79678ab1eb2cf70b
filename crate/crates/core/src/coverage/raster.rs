use super::geometry::{Point, Rect};
use crate::error::{Error, Result};

const MAX_RASTER_CELLS: usize = 200_000_000;

/// Counts, for every raster cell center in `bounds` at pitch `h`, how many
/// points lie within `rho` (inclusive), and returns the number of centers
/// reaching `k`.
pub(crate) fn covered_cell_count(points: &[Point], bounds: Rect, rho: f64, k: usize, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!("raster pitch must be positive, got {h}")));
    }
    // Centers x_min + (i + 1/2) h strictly inside the box.
    let cells_along = |extent: f64| ((extent / h - 0.5).ceil().max(0.0)) as usize;
    let nx = cells_along(bounds.width());
    let ny = cells_along(bounds.height());
    if nx.saturating_mul(ny) > MAX_RASTER_CELLS {
        return Err(Error::InvalidConfig(format!("raster of {nx} x {ny} cells is too fine")));
    }
    let mut counts = vec![0u32; nx * ny];
    let rho2 = rho * rho;
    let index_range = |lo: f64, c: f64, n: usize| {
        let first = ((c - rho - lo) / h - 0.5).floor().max(0.0) as usize;
        let last = (((c + rho - lo) / h - 0.5).ceil().max(-1.0) + 1.0) as usize;
        first..last.min(n)
    };
    for p in points {
        let xs = index_range(bounds.x_min, p.x, nx);
        let ys = index_range(bounds.y_min, p.y, ny);
        for iy in ys {
            let cy = bounds.y_min + (iy as f64 + 0.5) * h;
            let dy2 = (cy - p.y) * (cy - p.y);
            if dy2 > rho2 {
                continue;
            }
            let row = &mut counts[iy * nx..(iy + 1) * nx];
            for ix in xs.clone() {
                let cx = bounds.x_min + (ix as f64 + 0.5) * h;
                if (cx - p.x) * (cx - p.x) + dy2 <= rho2 {
                    row[ix] += 1;
                }
            }
        }
    }
    Ok(counts.iter().filter(|&&c| c as usize >= k).count())
}

//! Bidirectional squared Chamfer distance with a uniform-grid nearest
//! neighbor index.

use rayon::prelude::*;

use super::MetricsError;

/// `CD(X, Y) = mean_x min_y |x - y|^2 + mean_y min_x |y - x|^2`.
///
/// Distances are squared and both directions are averaged — callers are
/// expected to normalize both clouds to the unit box beforehand.
pub fn chamfer(x: &[[f64; 3]], y: &[[f64; 3]]) -> Result<f64, MetricsError> {
    if x.is_empty() || y.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    Ok(directed_mean(x, y) + directed_mean(y, x))
}

fn directed_mean(from: &[[f64; 3]], to: &[[f64; 3]]) -> f64 {
    let index = GridIndex::build(to);
    let total: f64 = from.par_iter().map(|p| index.nearest_sq(p)).sum();
    total / from.len() as f64
}

struct GridIndex<'a> {
    points: &'a [[f64; 3]],
    lo: [f64; 3],
    inv_h: f64,
    h: f64,
    dims: [usize; 3],
    cells: Vec<Vec<u32>>,
}

impl<'a> GridIndex<'a> {
    fn build(points: &'a [[f64; 3]]) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0f64, f64::max);
        // Aim for O(1) points per cell.
        let target = (points.len() as f64).cbrt().ceil().max(1.0);
        let h = if extent > 0.0 { extent / target } else { 1.0 };
        let dims = std::array::from_fn(|k| (((hi[k] - lo[k]) / h).floor() as usize + 1).max(1));
        let mut cells = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p, &lo, 1.0 / h, &dims);
            cells[c].push(i as u32);
        }
        Self {
            points,
            lo,
            inv_h: 1.0 / h,
            h,
            dims,
            cells,
        }
    }

    /// Exact squared nearest-neighbor distance via expanding cell rings.
    fn nearest_sq(&self, p: &[f64; 3]) -> f64 {
        let cx = grid_coord(p[0], self.lo[0], self.inv_h, self.dims[0]);
        let cy = grid_coord(p[1], self.lo[1], self.inv_h, self.dims[1]);
        let cz = grid_coord(p[2], self.lo[2], self.inv_h, self.dims[2]);
        let mut best = f64::INFINITY;
        let max_ring = self.dims.iter().max().copied().unwrap_or(1);
        for ring in 0..=max_ring {
            // Any point in a cell at Chebyshev ring r is at least (r-1)h
            // away; once that bound exceeds the best, stop.
            if ring >= 2 {
                let bound = (ring - 1) as f64 * self.h;
                if bound * bound > best {
                    break;
                }
            }
            self.scan_ring(cx, cy, cz, ring, p, &mut best);
        }
        best
    }

    fn scan_ring(
        &self,
        cx: usize,
        cy: usize,
        cz: usize,
        ring: usize,
        p: &[f64; 3],
        best: &mut f64,
    ) {
        let r = ring as isize;
        let (cx, cy, cz) = (cx as isize, cy as isize, cz as isize);
        for dx in -r..=r {
            for dy in -r..=r {
                for dz in -r..=r {
                    if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                        continue;
                    }
                    let (ix, iy, iz) = (cx + dx, cy + dy, cz + dz);
                    if ix < 0
                        || iy < 0
                        || iz < 0
                        || ix >= self.dims[0] as isize
                        || iy >= self.dims[1] as isize
                        || iz >= self.dims[2] as isize
                    {
                        continue;
                    }
                    let cell =
                        (ix as usize * self.dims[1] + iy as usize) * self.dims[2] + iz as usize;
                    for &pi in &self.cells[cell] {
                        let q = &self.points[pi as usize];
                        let d =
                            (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                        if d < *best {
                            *best = d;
                        }
                    }
                }
            }
        }
    }
}

fn grid_coord(v: f64, lo: f64, inv_h: f64, dim: usize) -> usize {
    (((v - lo) * inv_h).floor() as isize).clamp(0, dim as isize - 1) as usize
}

fn cell_of(p: &[f64; 3], lo: &[f64; 3], inv_h: f64, dims: &[usize; 3]) -> usize {
    let x = grid_coord(p[0], lo[0], inv_h, dims[0]);
    let y = grid_coord(p[1], lo[1], inv_h, dims[1]);
    let z = grid_coord(p[2], lo[2], inv_h, dims[2]);
    (x * dims[1] + y) * dims[2] + z
}

//! Loop shape library. Every emitted coordinate lies on the quantization
//! grid, so closure and arc geometry survive quantization exactly.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::lang::{dequantize_scalar, quantize_scalar, Curve, Loop, Point2};

use super::ShapeWeights;

/// Snap a value in [0,1] to the grid.
fn snap(v: f64) -> f64 {
    dequantize_scalar(quantize_scalar(v.clamp(0.0, 1.0)).expect("clamped"))
}

/// Draw a grid value in `[lo, hi]`.
pub fn grid_in(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> f64 {
    let ql = quantize_scalar(lo.clamp(0.0, 1.0)).expect("range");
    let qh = quantize_scalar(hi.clamp(0.0, 1.0)).expect("range").max(ql);
    dequantize_scalar(rng.random_range(ql..=qh))
}

/// A placement cell in sketch coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Cell {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Rectangle,
    Ngon,
    Circle,
    Slot,
}

pub fn draw_shape_kind(rng: &mut ChaCha12Rng, w: &ShapeWeights) -> ShapeKind {
    let total = w.rectangle + w.ngon + w.circle + w.slot;
    let mut r = rng.random::<f64>() * total;
    for (kind, weight) in [
        (ShapeKind::Rectangle, w.rectangle),
        (ShapeKind::Ngon, w.ngon),
        (ShapeKind::Circle, w.circle),
        (ShapeKind::Slot, w.slot),
    ] {
        if r < weight {
            return kind;
        }
        r -= weight;
    }
    ShapeKind::Rectangle
}

/// Counter-clockwise rectangle from grid corners inside the cell.
pub fn rectangle(rng: &mut ChaCha12Rng, cell: &Cell) -> Loop {
    let min_side = 0.08;
    let x0 = grid_in(rng, cell.x0, cell.x1 - min_side);
    let y0 = grid_in(rng, cell.y0, cell.y1 - min_side);
    let x1 = grid_in(rng, x0 + min_side, cell.x1);
    let y1 = grid_in(rng, y0 + min_side, cell.y1);
    let pts = [
        Point2::new(x0, y0),
        Point2::new(x1, y0),
        Point2::new(x1, y1),
        Point2::new(x0, y1),
    ];
    lines_loop(&pts)
}

/// Regular n-gon (3..=6 sides), vertices snapped to the grid.
pub fn ngon(rng: &mut ChaCha12Rng, cell: &Cell) -> Loop {
    let n = rng.random_range(3..=6usize);
    let r_max = 0.5 * cell.width().min(cell.height());
    let r = grid_in(rng, (0.45 * r_max).max(0.06), r_max.max(0.07));
    let cx = grid_in(rng, cell.x0 + r, cell.x1 - r);
    let cy = grid_in(rng, cell.y0 + r, cell.y1 - r);
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    let pts: Vec<Point2> = (0..n)
        .map(|i| {
            let a = phase + std::f64::consts::TAU * i as f64 / n as f64;
            Point2::new(snap(cx + r * a.cos()), snap(cy + r * a.sin()))
        })
        .collect();
    lines_loop(&pts)
}

/// Circle loop: grid center and grid radius so the top point is exact.
pub fn circle(rng: &mut ChaCha12Rng, cell: &Cell) -> Loop {
    let r_max = 0.5 * cell.width().min(cell.height());
    let r = grid_in(rng, (0.4 * r_max).max(0.04), r_max.max(0.05));
    let cx = grid_in(rng, cell.x0 + r, cell.x1 - r);
    let cy = grid_in(rng, cell.y0 + r, cell.y1 - r);
    circle_at(cx, cy, r)
}

pub fn circle_at(cx: f64, cy: f64, r: f64) -> Loop {
    Loop {
        curves: vec![Curve::Circle {
            center: Point2::new(cx, cy),
            top: Point2::new(cx, snap(cy + r)),
        }],
    }
}

/// Stadium slot: two horizontal lines joined by semicircular arcs, emitted
/// counter-clockwise.
pub fn slot(rng: &mut ChaCha12Rng, cell: &Cell) -> Loop {
    let r = grid_in(
        rng,
        (0.12 * cell.height()).max(0.04),
        (0.30 * cell.height()).max(0.05),
    );
    let cy = grid_in(rng, cell.y0 + 1.5 * r, cell.y1 - 1.5 * r);
    let x0 = grid_in(rng, cell.x0 + 1.5 * r, cell.x1 - 2.5 * r - 0.08);
    let x1 = grid_in(rng, x0 + 0.08, cell.x1 - 1.5 * r);
    let bottom_y = snap(cy - r);
    let top_y = snap(cy + r);
    let a = Point2::new(x0, bottom_y);
    let b = Point2::new(x1, bottom_y);
    let c = Point2::new(x1, top_y);
    let d = Point2::new(x0, top_y);
    let right_mid = Point2::new(snap(x1 + r), cy);
    let left_mid = Point2::new(snap(x0 - r), cy);
    Loop {
        curves: vec![
            Curve::Line { start: a, end: b },
            Curve::Arc {
                start: b,
                mid: right_mid,
                end: c,
            },
            Curve::Line { start: c, end: d },
            Curve::Arc {
                start: d,
                mid: left_mid,
                end: a,
            },
        ],
    }
}

fn lines_loop(pts: &[Point2]) -> Loop {
    let n = pts.len();
    Loop {
        curves: (0..n)
            .map(|i| Curve::Line {
                start: pts[i],
                end: pts[(i + 1) % n],
            })
            .collect(),
    }
}

/// Largest circle loop that fits strictly inside a rectangle-ish loop's
/// interior, for hole faces. Returns `None` when the interior is too small.
pub fn hole_inside(rng: &mut ChaCha12Rng, outer: &Loop) -> Option<Loop> {
    let mut bb = crate::lang::curve2d::Bbox2::empty();
    for c in &outer.curves {
        bb.merge(&crate::lang::curve2d::curve_bbox(c));
    }
    let w = bb.max.x - bb.min.x;
    let h = bb.max.y - bb.min.y;
    let r_max = 0.25 * w.min(h);
    if r_max < 0.03 {
        return None;
    }
    let r = grid_in(rng, (0.5 * r_max).max(0.02), r_max);
    let cx = grid_in(
        rng,
        bb.min.x + 0.5 * w - 0.1 * w,
        bb.min.x + 0.5 * w + 0.1 * w,
    );
    let cy = grid_in(
        rng,
        bb.min.y + 0.5 * h - 0.1 * h,
        bb.min.y + 0.5 * h + 0.1 * h,
    );
    Some(circle_at(cx, cy, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::curve2d::loop_signed_area;
    use rand::SeedableRng;

    fn cell() -> Cell {
        Cell {
            x0: 0.0,
            y0: 0.0,
            x1: 1.0,
            y1: 1.0,
        }
    }

    fn on_grid(p: &Point2) -> bool {
        let near = |v: f64| (v * 255.0 - (v * 255.0).round()).abs() < 1e-9;
        near(p.x) && near(p.y)
    }

    #[test]
    fn all_shapes_are_closed_ccw_grid_loops() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for i in 0..200 {
            let lp = match i % 4 {
                0 => rectangle(&mut rng, &cell()),
                1 => ngon(&mut rng, &cell()),
                2 => circle(&mut rng, &cell()),
                _ => slot(&mut rng, &cell()),
            };
            for c in &lp.curves {
                match c {
                    Curve::Line { start, end } => {
                        assert!(on_grid(start) && on_grid(end));
                    }
                    Curve::Arc { start, mid, end } => {
                        assert!(on_grid(start) && on_grid(mid) && on_grid(end));
                    }
                    Curve::Circle { center, top } => {
                        assert!(on_grid(center) && on_grid(top));
                    }
                }
            }
            // Closed within one quantum and counter-clockwise.
            let n = lp.curves.len();
            if n > 1 {
                for k in 0..n {
                    let gap = lp.curves[k]
                        .end_point()
                        .dist(&lp.curves[(k + 1) % n].start_point());
                    assert!(gap < 1e-12, "loop {i} open at curve {k}");
                }
            }
            assert!(loop_signed_area(&lp.curves) > 0.0, "loop {i} not ccw");
        }
    }

    #[test]
    fn hole_fits_inside_rectangle() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..50 {
            let outer = rectangle(&mut rng, &cell());
            if let Some(hole) = hole_inside(&mut rng, &outer) {
                let mut obb = crate::lang::curve2d::Bbox2::empty();
                for c in &outer.curves {
                    obb.merge(&crate::lang::curve2d::curve_bbox(c));
                }
                let mut hbb = crate::lang::curve2d::Bbox2::empty();
                for c in &hole.curves {
                    hbb.merge(&crate::lang::curve2d::curve_bbox(c));
                }
                assert!(hbb.min.x > obb.min.x && hbb.max.x < obb.max.x);
                assert!(hbb.min.y > obb.min.y && hbb.max.y < obb.max.y);
            }
        }
    }
}

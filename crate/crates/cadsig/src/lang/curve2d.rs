//! Pure 2D curve math shared by preprocessing, the geometry kernel, and the
//! entity-matching metrics: arc parametrization, exact bounding boxes, and
//! chordal-tolerance tessellation.

use super::{Curve, Point2};

/// Default chordal tolerance for tessellation: half a quantization quantum,
/// so tessellation error stays below quantization noise.
pub const CHORD_TOL: f64 = 1.0 / 512.0;

/// Axis-aligned 2D bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bbox2 {
    pub min: Point2,
    pub max: Point2,
}

impl Bbox2 {
    pub fn empty() -> Self {
        Self {
            min: Point2::new(f64::INFINITY, f64::INFINITY),
            max: Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn include(&mut self, p: Point2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn merge(&mut self, o: &Bbox2) {
        self.include(o.min);
        self.include(o.max);
    }

    /// Bottom-left corner, the sort key for preprocessing and matching.
    pub fn bottom_left(&self) -> Point2 {
        self.min
    }

    pub fn top_right(&self) -> Point2 {
        self.max
    }
}

/// Arc geometry recovered from its three defining points.
#[derive(Debug, Clone, Copy)]
pub struct ArcGeom {
    pub center: Point2,
    pub radius: f64,
    /// Angle of the start point.
    pub a_start: f64,
    /// Signed sweep from start to end; positive is counter-clockwise.
    pub sweep: f64,
}

impl ArcGeom {
    pub fn point_at(&self, t: f64) -> Point2 {
        let a = self.a_start + t * self.sweep;
        Point2::new(
            self.center.x + self.radius * a.cos(),
            self.center.y + self.radius * a.sin(),
        )
    }
}

/// Circumcenter of three points, or `None` when they are (nearly) collinear.
pub fn circumcenter(a: Point2, b: Point2, c: Point2) -> Option<Point2> {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    let span = a.dist(&b).max(b.dist(&c)).max(a.dist(&c));
    if d.abs() < 1e-12 * span.max(1e-12) {
        return None;
    }
    let a2 = a.x * a.x + a.y * a.y;
    let b2 = b.x * b.x + b.y * b.y;
    let c2 = c.x * c.x + c.y * c.y;
    Some(Point2::new(
        (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d,
        (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d,
    ))
}

/// Solve the arc through `(start, mid, end)`.
///
/// Returns `None` for degenerate configurations (collinear or coincident
/// points) — callers treat those as invalid curves.
pub fn arc_geometry(start: Point2, mid: Point2, end: Point2) -> Option<ArcGeom> {
    let center = circumcenter(start, mid, end)?;
    let radius = center.dist(&start);
    if radius < 1e-12 {
        return None;
    }
    let a_start = (start.y - center.y).atan2(start.x - center.x);
    let a_mid = (mid.y - center.y).atan2(mid.x - center.x);
    let a_end = (end.y - center.y).atan2(end.x - center.x);
    // Choose the sweep direction that passes through the mid point.
    let ccw_mid = positive_sweep(a_start, a_mid);
    let ccw_end = positive_sweep(a_start, a_end);
    let sweep = if ccw_mid <= ccw_end {
        ccw_end
    } else {
        ccw_end - std::f64::consts::TAU
    };
    if sweep.abs() < 1e-9 {
        return None;
    }
    Some(ArcGeom {
        center,
        radius,
        a_start,
        sweep,
    })
}

fn positive_sweep(from: f64, to: f64) -> f64 {
    let mut s = to - from;
    while s < 0.0 {
        s += std::f64::consts::TAU;
    }
    while s >= std::f64::consts::TAU {
        s -= std::f64::consts::TAU;
    }
    s
}

/// Circle radius from the center/top-most-point encoding.
pub fn circle_radius(center: Point2, top: Point2) -> f64 {
    center.dist(&top)
}

/// Exact bounding box of a curve (arc extremes included).
pub fn curve_bbox(curve: &Curve) -> Bbox2 {
    let mut bb = Bbox2::empty();
    match curve {
        Curve::Line { start, end } => {
            bb.include(*start);
            bb.include(*end);
        }
        Curve::Arc { start, mid, end } => {
            bb.include(*start);
            bb.include(*end);
            match arc_geometry(*start, *mid, *end) {
                Some(g) => {
                    for quadrant in 0..4 {
                        let axis = f64::from(quadrant) * std::f64::consts::FRAC_PI_2;
                        if angle_on_arc(&g, axis) {
                            bb.include(Point2::new(
                                g.center.x + g.radius * axis.cos(),
                                g.center.y + g.radius * axis.sin(),
                            ));
                        }
                    }
                }
                None => bb.include(*mid),
            }
        }
        Curve::Circle { center, top } => {
            let r = circle_radius(*center, *top);
            bb.include(Point2::new(center.x - r, center.y - r));
            bb.include(Point2::new(center.x + r, center.y + r));
        }
    }
    bb
}

fn angle_on_arc(g: &ArcGeom, angle: f64) -> bool {
    let rel = if g.sweep >= 0.0 {
        positive_sweep(g.a_start, angle)
    } else {
        -positive_sweep(angle, g.a_start)
    };
    rel.abs() <= g.sweep.abs()
}

/// Tessellate a curve into a polyline within `tol` chordal error.
///
/// The polyline includes the start point and excludes the end point (so
/// loop polylines concatenate without duplicates); circles return their
/// full polygon.
pub fn tessellate_curve(curve: &Curve, tol: f64) -> Vec<Point2> {
    match curve {
        Curve::Line { start, .. } => vec![*start],
        Curve::Arc { start, mid, end } => match arc_geometry(*start, *mid, *end) {
            Some(g) => {
                let n = arc_segments(g.radius, g.sweep.abs(), tol);
                (0..n)
                    .map(|i| g.point_at(f64::from(i) / f64::from(n)))
                    .collect()
            }
            None => vec![*start, *mid],
        },
        Curve::Circle { center, top } => {
            let r = circle_radius(*center, *top);
            let n = arc_segments(r, std::f64::consts::TAU, tol).max(8);
            (0..n)
                .map(|i| {
                    let a = std::f64::consts::TAU * f64::from(i) / f64::from(n);
                    Point2::new(center.x + r * a.cos(), center.y + r * a.sin())
                })
                .collect()
        }
    }
}

fn arc_segments(radius: f64, span: f64, tol: f64) -> u32 {
    if radius <= tol {
        return 4;
    }
    // Sagitta s = r (1 - cos(step/2)) <= tol.
    let max_step = 2.0 * (1.0 - tol / radius).max(-1.0).acos();
    if max_step <= 0.0 {
        return 4;
    }
    ((span / max_step).ceil() as u32).clamp(2, 4096)
}

/// Closed polyline for a whole loop (consecutive curve starts, arcs sampled).
pub fn loop_polyline(curves: &[Curve], tol: f64) -> Vec<Point2> {
    let mut pts = Vec::new();
    for c in curves {
        pts.extend(tessellate_curve(c, tol));
    }
    pts
}

/// Shoelace signed area of a closed polyline (positive = counter-clockwise).
pub fn signed_area(pts: &[Point2]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..pts.len() {
        let p = pts[i];
        let q = pts[(i + 1) % pts.len()];
        acc += p.x * q.y - q.x * p.y;
    }
    acc * 0.5
}

/// Signed area of a loop; circles count as their disc area (always CCW).
pub fn loop_signed_area(curves: &[Curve]) -> f64 {
    if let [Curve::Circle { center, top }] = curves {
        let r = circle_radius(*center, *top);
        return std::f64::consts::PI * r * r;
    }
    signed_area(&loop_polyline(curves, CHORD_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circumcenter_of_right_triangle() {
        let c = circumcenter(
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        )
        .unwrap();
        assert!((c.x - 0.5).abs() < 1e-12 && (c.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_have_no_arc() {
        assert!(arc_geometry(
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(1.0, 0.0)
        )
        .is_none());
    }

    #[test]
    fn semicircle_arc_bbox_includes_extreme() {
        // Upper semicircle from (0,0) through (0.5,0.5) to (1,0): the top
        // extreme (0.5, 0.5) and the x extremes are the control points, but
        // a quarter arc exposes a non-control extreme.
        let bb = curve_bbox(&Curve::Arc {
            start: Point2::new(1.0, 0.5),
            mid: Point2::new(
                0.5 + 0.5 * std::f64::consts::FRAC_1_SQRT_2,
                0.5 + 0.5 * std::f64::consts::FRAC_1_SQRT_2,
            ),
            end: Point2::new(0.5, 1.0),
        });
        assert!((bb.max.x - 1.0).abs() < 1e-9);
        assert!((bb.max.y - 1.0).abs() < 1e-9);
        assert!((bb.min.x - 0.5).abs() < 1e-9);
        assert!((bb.min.y - 0.5).abs() < 1e-9);
    }

    #[test]
    fn arc_sweep_follows_mid_point() {
        // Left -> bottom -> right runs counter-clockwise about the center.
        let g = arc_geometry(
            Point2::new(0.0, 0.0),
            Point2::new(0.5, -0.5),
            Point2::new(1.0, 0.0),
        )
        .unwrap();
        assert!(g.sweep > 0.0);
        let m = g.point_at(0.5);
        assert!((m.x - 0.5).abs() < 1e-9 && (m.y + 0.5).abs() < 1e-9);

        // Left -> top -> right runs clockwise.
        let g = arc_geometry(
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(1.0, 0.0),
        )
        .unwrap();
        assert!(g.sweep < 0.0);
        let m = g.point_at(0.5);
        assert!((m.x - 0.5).abs() < 1e-9 && (m.y - 0.5).abs() < 1e-9);
    }

    #[test]
    fn tessellation_chordal_error_below_tolerance() {
        let c = Curve::Circle {
            center: Point2::new(0.5, 0.5),
            top: Point2::new(0.5, 0.9),
        };
        let poly = tessellate_curve(&c, CHORD_TOL);
        assert!(poly.len() >= 16);
        for i in 0..poly.len() {
            let p = poly[i];
            let q = poly[(i + 1) % poly.len()];
            let mid = Point2::new(0.5 * (p.x + q.x), 0.5 * (p.y + q.y));
            let sagitta = (mid.dist(&Point2::new(0.5, 0.5)) - 0.4).abs();
            assert!(sagitta <= CHORD_TOL + 1e-12);
        }
    }

    #[test]
    fn square_signed_area() {
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert!((signed_area(&sq) - 1.0).abs() < 1e-12);
        let mut rev = sq;
        rev.reverse();
        assert!((signed_area(&rev) + 1.0).abs() < 1e-12);
    }
}

//! Tessellated 2D sketch regions with even-odd membership.

use crate::lang::curve2d::{circle_radius, loop_polyline, loop_signed_area, Bbox2, CHORD_TOL};
use crate::lang::{Curve, Point2, Sketch};

const EPS: f64 = 1e-12;
/// Loop endpoints must coincide within one quantization quantum.
const CLOSURE_TOL: f64 = 1.0 / 255.0 + 1e-9;
const AREA_TOL: f64 = 1e-9;

/// One face as closed polylines, one per loop.
#[derive(Debug, Clone)]
pub struct FaceRegion {
    pub loops: Vec<Vec<Point2>>,
}

impl FaceRegion {
    /// Even-odd membership across all loops of the face.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        let mut inside = false;
        for poly in &self.loops {
            let n = poly.len();
            for i in 0..n {
                let p = poly[i];
                let q = poly[(i + 1) % n];
                if (p.y > v) != (q.y > v) {
                    let x_cross = p.x + (v - p.y) * (q.x - p.x) / (q.y - p.y);
                    if u < x_cross {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }
}

/// A validated, tessellated sketch.
#[derive(Debug, Clone)]
pub struct SketchRegion {
    pub faces: Vec<FaceRegion>,
    pub bbox: Bbox2,
}

impl SketchRegion {
    /// Tessellate and validate a sketch.
    ///
    /// Returns a diagnosis string instead of a region when a curve is
    /// degenerate, a loop is open, or a face has zero area.
    pub fn build(sketch: &Sketch) -> Result<SketchRegion, String> {
        if sketch.faces.is_empty() {
            return Err("sketch has no faces".to_string());
        }
        let mut faces = Vec::with_capacity(sketch.faces.len());
        let mut bbox = Bbox2::empty();
        for (fi, face) in sketch.faces.iter().enumerate() {
            if face.loops.is_empty() {
                return Err(format!("face {fi} has no loops"));
            }
            let mut loops = Vec::with_capacity(face.loops.len());
            let mut max_area = 0.0_f64;
            for (li, lp) in face.loops.iter().enumerate() {
                if lp.curves.is_empty() {
                    return Err(format!("face {fi} loop {li} has no curves"));
                }
                for (ci, c) in lp.curves.iter().enumerate() {
                    check_curve(c).map_err(|why| {
                        format!("degenerate curve: face {fi} loop {li} curve {ci}: {why}")
                    })?;
                    if matches!(c, Curve::Circle { .. }) && lp.curves.len() > 1 {
                        return Err(format!(
                            "face {fi} loop {li}: circle inside a multi-curve loop"
                        ));
                    }
                }
                if !closed(&lp.curves) {
                    return Err(format!("open loop: face {fi} loop {li}"));
                }
                max_area = max_area.max(loop_signed_area(&lp.curves).abs());
                let poly = loop_polyline(&lp.curves, CHORD_TOL);
                if poly.len() < 3 {
                    return Err(format!("degenerate loop: face {fi} loop {li}"));
                }
                for p in &poly {
                    bbox.include(*p);
                }
                loops.push(poly);
            }
            if max_area < AREA_TOL {
                return Err(format!("zero-area face {fi}"));
            }
            faces.push(FaceRegion { loops });
        }
        Ok(SketchRegion { faces, bbox })
    }

    /// Union-over-faces membership.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        self.faces.iter().any(|f| f.contains(u, v))
    }

    /// Even-odd area estimate on a regular grid over the bounding box.
    ///
    /// Deterministic; used only for area-weighted sampling, never for
    /// membership decisions.
    pub fn grid_area(&self, resolution: usize) -> f64 {
        let w = self.bbox.max.x - self.bbox.min.x;
        let h = self.bbox.max.y - self.bbox.min.y;
        if w <= 0.0 || h <= 0.0 {
            return 0.0;
        }
        let mut hits = 0usize;
        for i in 0..resolution {
            let u = self.bbox.min.x + w * (0.5 + i as f64) / resolution as f64;
            for j in 0..resolution {
                let v = self.bbox.min.y + h * (0.5 + j as f64) / resolution as f64;
                if self.contains(u, v) {
                    hits += 1;
                }
            }
        }
        w * h * hits as f64 / (resolution * resolution) as f64
    }
}

fn check_curve(c: &Curve) -> Result<(), String> {
    match c {
        Curve::Line { start, end } => {
            if start.dist(end) < EPS {
                Err("line start equals end".to_string())
            } else {
                Ok(())
            }
        }
        Curve::Arc { start, mid, end } => {
            if start.dist(mid) < EPS || mid.dist(end) < EPS {
                return Err("arc has coincident control points".to_string());
            }
            if crate::lang::curve2d::arc_geometry(*start, *mid, *end).is_none() {
                return Err("arc points are collinear".to_string());
            }
            Ok(())
        }
        Curve::Circle { center, top } => {
            if circle_radius(*center, *top) < EPS {
                Err("circle has zero radius".to_string())
            } else {
                Ok(())
            }
        }
    }
}

fn closed(curves: &[Curve]) -> bool {
    if let [Curve::Circle { .. }] = curves {
        return true;
    }
    let n = curves.len();
    (0..n).all(|i| {
        curves[i]
            .end_point()
            .dist(&curves[(i + 1) % n].start_point())
            <= CLOSURE_TOL
    })
}

//! Program evaluation: extruded primitives, CSG membership, and boundary
//! sampling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::lang::{BooleanOp, CadProgram, Point2};

use super::pose::Pose;
use super::region::SketchRegion;

/// Relative two-sided boundary test offset (times the bbox diagonal).
const BOUNDARY_EPS_REL: f64 = 1e-4;
/// Grid resolution for region area estimates.
const AREA_GRID: usize = 128;
/// Maximum draw multiplier before sampling gives up.
const MAX_DRAW_ROUNDS: usize = 40;

/// One extruded design step evaluated into a membership primitive.
#[derive(Debug, Clone)]
pub struct ExtrudedPrim {
    pub pose: Pose,
    pub d_plus: f64,
    pub d_minus: f64,
    pub region: SketchRegion,
    pub op: BooleanOp,
}

impl ExtrudedPrim {
    pub fn contains(&self, p: &[f64; 3]) -> bool {
        let s = self.pose.world_to_sketch(p);
        if s[2] < -self.d_minus || s[2] > self.d_plus {
            return false;
        }
        self.region.contains(s[0], s[1])
    }

    /// World-space axis-aligned bounds (conservative, from the region bbox).
    fn world_bbox(&self) -> ([f64; 3], [f64; 3]) {
        let bb = &self.region.bbox;
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &u in &[bb.min.x, bb.max.x] {
            for &v in &[bb.min.y, bb.max.y] {
                for &w in &[-self.d_minus, self.d_plus] {
                    let p = self.pose.sketch_to_world(u, v, w);
                    for k in 0..3 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
            }
        }
        (lo, hi)
    }
}

/// The final CSG solid: primitives combined sequentially by boolean op.
#[derive(Debug, Clone)]
pub struct Solid {
    pub prims: Vec<ExtrudedPrim>,
}

impl Solid {
    pub fn contains(&self, p: &[f64; 3]) -> bool {
        let mut inside = false;
        for prim in &self.prims {
            let m = prim.contains(p);
            inside = match prim.op {
                BooleanOp::New | BooleanOp::Join => inside || m,
                BooleanOp::Cut => inside && !m,
                BooleanOp::Intersect => inside && m,
            };
        }
        inside
    }

    pub fn world_bbox(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for prim in &self.prims {
            let (plo, phi) = prim.world_bbox();
            for k in 0..3 {
                lo[k] = lo[k].min(plo[k]);
                hi[k] = hi[k].max(phi[k]);
            }
        }
        (lo, hi)
    }

    /// Offset used by the two-sided boundary test.
    pub fn boundary_eps(&self) -> f64 {
        let (lo, hi) = self.world_bbox();
        let diag =
            ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2)).sqrt();
        (diag * BOUNDARY_EPS_REL).max(1e-12)
    }

    /// Two-sided membership test: exactly one of the eps-offset probes along
    /// the normal is inside.
    pub fn on_boundary(&self, p: &[f64; 3], normal: &[f64; 3], eps: f64) -> bool {
        let plus = [
            p[0] + eps * normal[0],
            p[1] + eps * normal[1],
            p[2] + eps * normal[2],
        ];
        let minus = [
            p[0] - eps * normal[0],
            p[1] - eps * normal[1],
            p[2] - eps * normal[2],
        ];
        self.contains(&plus) != self.contains(&minus)
    }
}

/// A sampled boundary point with its outward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub position: [f64; 3],
    pub normal: [f64; 3],
}

/// Result of evaluating a program into geometry.
#[derive(Debug, Clone)]
pub struct SolidSample {
    /// Membership oracle; absent when the program is invalid.
    pub solid: Option<Solid>,
    pub boundary: Vec<BoundaryPoint>,
    pub valid: bool,
    pub diag: String,
}

impl SolidSample {
    pub fn membership(&self, p: &[f64; 3]) -> bool {
        self.solid.as_ref().is_some_and(|s| s.contains(p))
    }

    fn invalid(diag: String) -> Self {
        Self {
            solid: None,
            boundary: Vec::new(),
            valid: false,
            diag,
        }
    }

    /// Boundary positions as flat rows.
    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.boundary.iter().map(|b| b.position).collect()
    }
}

/// One sampleable surface patch of a primitive.
enum Surface {
    /// Cap at fixed normal offset; samples rejection-draw inside the region.
    Cap { prim: usize, w: f64, flip: bool },
    /// Wall quad swept from one tessellated loop segment.
    Wall { prim: usize, a: Point2, b: Point2 },
}

struct WeightedSurface {
    surface: Surface,
    area: f64,
}

/// Evaluate a program into a membership oracle plus `n_samples` boundary
/// points.
///
/// Never fails on bad geometry: degenerate curves, open loops, zero-area
/// faces, and empty final solids all come back as `valid = false` with a
/// diagnosis string.
pub fn evaluate_program(prog: &CadProgram, n_samples: usize, seed: u64) -> SolidSample {
    let solid = match build_solid(prog) {
        Ok(s) => s,
        Err(diag) => return SolidSample::invalid(diag),
    };
    let surfaces = enumerate_surfaces(&solid);
    let total_area: f64 = surfaces.iter().map(|s| s.area).sum();
    if total_area <= 0.0 || !total_area.is_finite() {
        return SolidSample::invalid("empty solid: no sampleable surface area".to_string());
    }
    let eps = solid.boundary_eps();

    // Cumulative weights for surface selection.
    let mut cumulative = Vec::with_capacity(surfaces.len());
    let mut acc = 0.0;
    for s in &surfaces {
        acc += s.area;
        cumulative.push(acc);
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut kept: Vec<BoundaryPoint> = Vec::with_capacity(n_samples);
    let mut rounds = 0;
    while kept.len() < n_samples && rounds < MAX_DRAW_ROUNDS {
        rounds += 1;
        let want = n_samples - kept.len();
        // Draw candidates sequentially for determinism, test in parallel.
        let candidates: Vec<(usize, f64, f64)> = (0..want.max(256))
            .map(|_| {
                let r: f64 = rng.random::<f64>() * total_area;
                let idx = cumulative
                    .partition_point(|c| *c < r)
                    .min(surfaces.len() - 1);
                (idx, rng.random::<f64>(), rng.random::<f64>())
            })
            .collect();
        let mut accepted: Vec<BoundaryPoint> = candidates
            .par_iter()
            .filter_map(|(idx, r1, r2)| try_surface_point(&solid, &surfaces[*idx], *r1, *r2, eps))
            .collect();
        kept.append(&mut accepted);
    }

    if kept.is_empty() {
        return SolidSample::invalid("empty solid: boundary sampling found no surface".to_string());
    }
    resample_to(&mut kept, n_samples, &mut rng);
    SolidSample {
        solid: Some(solid),
        boundary: kept,
        valid: true,
        diag: String::new(),
    }
}

/// Build the CSG primitive list, validating each sketch.
pub fn build_solid(prog: &CadProgram) -> Result<Solid, String> {
    if prog.steps.is_empty() {
        return Err("program has no steps".to_string());
    }
    let mut prims = Vec::with_capacity(prog.steps.len());
    for (si, step) in prog.steps.iter().enumerate() {
        let e = &step.extrusion;
        if e.sigma <= 0.0 {
            return Err(format!("step {si}: non-positive sigma"));
        }
        if e.d_plus < 0.0 || e.d_minus < 0.0 {
            return Err(format!("step {si}: negative extrusion distance"));
        }
        if e.d_plus + e.d_minus <= 0.0 {
            return Err(format!("step {si}: zero extrusion thickness"));
        }
        let region = SketchRegion::build(&step.sketch).map_err(|d| format!("step {si}: {d}"))?;
        let pose = Pose::from_extrusion(e).map_err(|d| format!("step {si}: {d}"))?;
        prims.push(ExtrudedPrim {
            pose,
            d_plus: e.d_plus,
            d_minus: e.d_minus,
            region,
            op: e.boolean_op,
        });
    }
    Ok(Solid { prims })
}

fn enumerate_surfaces(solid: &Solid) -> Vec<WeightedSurface> {
    let mut out = Vec::new();
    for (pi, prim) in solid.prims.iter().enumerate() {
        let cap_area = prim.region.grid_area(AREA_GRID) * prim.pose.sigma * prim.pose.sigma;
        if cap_area > 0.0 {
            out.push(WeightedSurface {
                surface: Surface::Cap {
                    prim: pi,
                    w: prim.d_plus,
                    flip: false,
                },
                area: cap_area,
            });
            out.push(WeightedSurface {
                surface: Surface::Cap {
                    prim: pi,
                    w: -prim.d_minus,
                    flip: true,
                },
                area: cap_area,
            });
        }
        let height = prim.d_plus + prim.d_minus;
        for face in &prim.region.faces {
            for poly in &face.loops {
                let n = poly.len();
                for i in 0..n {
                    let a = poly[i];
                    let b = poly[(i + 1) % n];
                    let len = a.dist(&b);
                    if len > 0.0 {
                        out.push(WeightedSurface {
                            surface: Surface::Wall { prim: pi, a, b },
                            area: len * prim.pose.sigma * height,
                        });
                    }
                }
            }
        }
    }
    out
}

fn try_surface_point(
    solid: &Solid,
    ws: &WeightedSurface,
    r1: f64,
    r2: f64,
    eps: f64,
) -> Option<BoundaryPoint> {
    let (point, mut normal) = match &ws.surface {
        Surface::Cap { prim, w, flip } => {
            let p = &solid.prims[*prim];
            let bb = &p.region.bbox;
            // Deterministic low-discrepancy walk from the two draws keeps
            // cap rejection sampling cheap without extra rng state.
            let mut u = bb.min.x + r1 * (bb.max.x - bb.min.x);
            let mut v = bb.min.y + r2 * (bb.max.y - bb.min.y);
            let mut ok = p.region.contains(u, v);
            let mut tries = 0;
            while !ok && tries < 64 {
                let (fu, fv) = halton_pair(tries as u64 + 1);
                u = bb.min.x + ((r1 + fu) % 1.0) * (bb.max.x - bb.min.x);
                v = bb.min.y + ((r2 + fv) % 1.0) * (bb.max.y - bb.min.y);
                ok = p.region.contains(u, v);
                tries += 1;
            }
            if !ok {
                return None;
            }
            let mut n = p.pose.normal();
            if *flip {
                n = [-n[0], -n[1], -n[2]];
            }
            (p.pose.sketch_to_world(u, v, *w), n)
        }
        Surface::Wall { prim, a, b } => {
            let p = &solid.prims[*prim];
            let u = a.x + r1 * (b.x - a.x);
            let v = a.y + r1 * (b.y - a.y);
            let w = -p.d_minus + r2 * (p.d_plus + p.d_minus);
            let dx = b.x - a.x;
            let dy = b.y - a.y;
            let len = (dx * dx + dy * dy).sqrt();
            // In-plane right-hand normal of the segment direction.
            let local_n = [dy / len, -dx / len, 0.0];
            let world_n = super::pose::mat_apply(&p.pose.rotation, &local_n);
            (p.pose.sketch_to_world(u, v, w), world_n)
        }
    };

    if !solid.on_boundary(&point, &normal, eps) {
        return None;
    }
    // Make the normal point away from the solid.
    let probe = [
        point[0] + eps * normal[0],
        point[1] + eps * normal[1],
        point[2] + eps * normal[2],
    ];
    if solid.contains(&probe) {
        normal = [-normal[0], -normal[1], -normal[2]];
    }
    Some(BoundaryPoint {
        position: point,
        normal,
    })
}

fn halton_pair(i: u64) -> (f64, f64) {
    (radical_inverse(i, 2), radical_inverse(i, 3))
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 0.0;
    let mut frac = 1.0 / base as f64;
    while i > 0 {
        inv += (i % base) as f64 * frac;
        i /= base;
        frac /= base as f64;
    }
    inv
}

fn resample_to(points: &mut Vec<BoundaryPoint>, n: usize, rng: &mut ChaCha12Rng) {
    use rand::seq::IndexedRandom;
    match points.len().cmp(&n) {
        std::cmp::Ordering::Greater => points.truncate(n),
        std::cmp::Ordering::Less => {
            let extra: Vec<BoundaryPoint> = (points.len()..n)
                .map(|_| *points.as_slice().choose(rng).expect("non-empty"))
                .collect();
            points.extend(extra);
        }
        std::cmp::Ordering::Equal => {}
    }
}

/// Sample points on the sketch-plane-side cap (`w = -d_minus`) of one step's
/// own primitive, ignoring later boolean operations.
pub fn sample_sketch_plane_cap(
    prog: &CadProgram,
    step: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<[f64; 3]>, String> {
    let solid = build_solid(prog)?;
    let prim = solid
        .prims
        .get(step)
        .ok_or_else(|| format!("step {step} out of range"))?;
    let bb = &prim.region.bbox;
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5eed_ca90);
    let mut out = Vec::with_capacity(n);
    let mut guard = 0;
    while out.len() < n && guard < 1000 * n {
        guard += 1;
        let u = bb.min.x + rng.random::<f64>() * (bb.max.x - bb.min.x);
        let v = bb.min.y + rng.random::<f64>() * (bb.max.y - bb.min.y);
        if prim.region.contains(u, v) {
            out.push(prim.pose.sketch_to_world(u, v, -prim.d_minus));
        }
    }
    if out.len() < n {
        return Err(format!("step {step}: cap region too thin to sample"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::fixtures::{single_step_program, unit_square_sketch};
    use crate::lang::{ExtrusionOp, Step};

    fn cube_program() -> CadProgram {
        single_step_program()
    }

    fn cube_cut_program() -> CadProgram {
        // Unit cube minus a centered half-size square column cut through.
        let mut prog = cube_program();
        let pts = [
            Point2::new(0.25, 0.25),
            Point2::new(0.75, 0.25),
            Point2::new(0.75, 0.75),
            Point2::new(0.25, 0.75),
        ];
        let curves = (0..4)
            .map(|i| crate::lang::Curve::Line {
                start: pts[i],
                end: pts[(i + 1) % 4],
            })
            .collect();
        prog.steps.push(Step {
            extrusion: ExtrusionOp {
                d_plus: 1.0,
                d_minus: 0.0,
                tau: [0.0, 0.0, 0.0],
                euler: [0.0, 0.0, 0.0],
                sigma: 1.0,
                boolean_op: BooleanOp::Cut,
            },
            sketch: crate::lang::Sketch {
                faces: vec![crate::lang::Face {
                    loops: vec![crate::lang::Loop { curves }],
                }],
            },
        });
        prog
    }

    #[test]
    fn unit_cube_membership() {
        let sample = evaluate_program(&cube_program(), 512, 7);
        assert!(sample.valid, "{}", sample.diag);
        assert!(sample.membership(&[0.5, 0.5, 0.5]));
        assert!(!sample.membership(&[1.5, 0.5, 0.5]));
        assert!(!sample.membership(&[0.5, 0.5, -0.1]));
        assert_eq!(sample.boundary.len(), 512);
    }

    #[test]
    fn cube_cut_removes_center() {
        let sample = evaluate_program(&cube_cut_program(), 512, 7);
        assert!(sample.valid, "{}", sample.diag);
        assert!(!sample.membership(&[0.5, 0.5, 0.5]));
        assert!(sample.membership(&[0.1, 0.1, 0.5]));
    }

    #[test]
    fn boundary_points_pass_two_sided_test() {
        let sample = evaluate_program(&cube_cut_program(), 1024, 3);
        let solid = sample.solid.as_ref().unwrap();
        let eps = solid.boundary_eps();
        for bp in &sample.boundary {
            assert!(solid.on_boundary(&bp.position, &bp.normal, eps));
            // Normal points outward.
            let out = [
                bp.position[0] + eps * bp.normal[0],
                bp.position[1] + eps * bp.normal[1],
                bp.position[2] + eps * bp.normal[2],
            ];
            assert!(!solid.contains(&out));
        }
    }

    #[test]
    fn degenerate_line_invalidates() {
        let mut prog = cube_program();
        prog.steps[0].sketch.faces[0].loops[0].curves[0] = crate::lang::Curve::Line {
            start: Point2::new(0.0, 0.0),
            end: Point2::new(0.0, 0.0),
        };
        let sample = evaluate_program(&prog, 64, 1);
        assert!(!sample.valid);
        assert!(sample.diag.contains("degenerate curve"), "{}", sample.diag);
    }

    #[test]
    fn cut_everything_is_invalid() {
        let mut prog = cube_program();
        let mut cut = prog.steps[0].clone();
        cut.extrusion.boolean_op = BooleanOp::Cut;
        prog.steps.push(cut);
        let sample = evaluate_program(&prog, 64, 1);
        assert!(!sample.valid);
        assert!(sample.diag.contains("empty"), "{}", sample.diag);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = evaluate_program(&cube_cut_program(), 256, 42);
        let b = evaluate_program(&cube_cut_program(), 256, 42);
        assert_eq!(a.boundary, b.boundary);
        let c = evaluate_program(&cube_cut_program(), 256, 43);
        assert_ne!(a.boundary, c.boundary);
    }

    #[test]
    fn csg_algebra_identities() {
        // Cut(A, A) empty; Join(A, A) = A; Intersect(A, A) = A on probes.
        let base = cube_program().steps[0].clone();
        let with = |op: BooleanOp| {
            let mut p = cube_program();
            let mut s = base.clone();
            s.extrusion.boolean_op = op;
            p.steps.push(s);
            build_solid(&p).unwrap()
        };
        let plain = build_solid(&cube_program()).unwrap();
        let cut = with(BooleanOp::Cut);
        let join = with(BooleanOp::Join);
        let intersect = with(BooleanOp::Intersect);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let p = [
                rng.random::<f64>() * 2.0 - 0.5,
                rng.random::<f64>() * 2.0 - 0.5,
                rng.random::<f64>() * 2.0 - 0.5,
            ];
            assert!(!cut.contains(&p));
            assert_eq!(join.contains(&p), plain.contains(&p));
            assert_eq!(intersect.contains(&p), plain.contains(&p));
        }
    }

    #[test]
    fn cap_sampler_stays_on_plane() {
        let prog = cube_program();
        let pts = sample_sketch_plane_cap(&prog, 0, 200, 9).unwrap();
        assert_eq!(pts.len(), 200);
        for p in pts {
            assert!(p[2].abs() < 1e-12);
            assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
        }
        let _ = unit_square_sketch();
    }
}

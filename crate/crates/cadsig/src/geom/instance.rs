//! Sketch-instance extraction: the subset of input points inside a step's
//! margin-enlarged projected sketch bounding box.

use crate::lang::ExtrusionOp;

use super::pose::Pose;

/// Containment slack absorbing floating-point round-trip noise; far below
/// any geometric scale at 8-bit quantization.
const BOX_TOL: f64 = 1e-9;

/// Margin factor along the sketch-plane normal.
const NORMAL_MARGIN: f64 = 0.1;

/// Point indices selected for one design step's sketch.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchInstance {
    pub indices: Vec<usize>,
    /// Normal-slab half-thickness in world units.
    pub margin: f64,
    /// Projected unit-box corners (columns), for diagnostics.
    pub corners: [[f64; 3]; 3],
}

impl SketchInstance {
    pub fn count(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// True when `p` lies inside the projected unit box enlarged by `margin`
/// along the plane normal (both directions). The in-plane box is not padded.
pub fn instance_box_contains(pose: &Pose, margin: f64, p: &[f64; 3]) -> bool {
    let s = pose.world_to_sketch(p);
    (-BOX_TOL..=1.0 + BOX_TOL).contains(&s[0])
        && (-BOX_TOL..=1.0 + BOX_TOL).contains(&s[1])
        && s[2].abs() <= margin + BOX_TOL
}

/// Select the points of `x` inside the margin-enlarged projected sketch box
/// of `ext`. Deterministic; an empty selection is a valid result.
pub fn extract_sketch_instance(x: &[[f64; 3]], ext: &ExtrusionOp) -> SketchInstance {
    let pose = match Pose::from_extrusion(ext) {
        Ok(p) => p,
        Err(_) => {
            return SketchInstance {
                indices: Vec::new(),
                margin: 0.0,
                corners: [[0.0; 3]; 3],
            }
        }
    };
    let margin = NORMAL_MARGIN * ext.d_plus.max(ext.d_minus);
    let indices = x
        .iter()
        .enumerate()
        .filter(|(_, p)| instance_box_contains(&pose, margin, p))
        .map(|(i, _)| i)
        .collect();
    let corners = super::pose::project_unit_bbox(ext).unwrap_or([[0.0; 3]; 3]);
    SketchInstance {
        indices,
        margin,
        corners,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::BooleanOp;

    fn identity_ext(d_plus: f64, d_minus: f64) -> ExtrusionOp {
        ExtrusionOp {
            d_plus,
            d_minus,
            tau: [0.0; 3],
            euler: [0.0; 3],
            sigma: 1.0,
            boolean_op: BooleanOp::New,
        }
    }

    #[test]
    fn slab_half_thickness_is_tenth_of_max_distance() {
        let ext = identity_ext(1.0, 0.0);
        let pts = [
            [0.5, 0.5, 0.05],
            [0.5, 0.5, 0.2],
            [2.0, 0.0, 0.0],
            [0.5, 0.5, -0.05],
        ];
        let inst = extract_sketch_instance(&pts, &ext);
        assert_eq!(inst.indices, vec![0, 3]);
        assert!((inst.margin - 0.1).abs() < 1e-15);
    }

    #[test]
    fn outside_unit_square_excluded() {
        let ext = identity_ext(0.5, 0.0);
        let inst = extract_sketch_instance(&[[2.0, 0.0, 0.0], [0.5, 1.2, 0.0]], &ext);
        assert!(inst.is_empty());
    }

    #[test]
    fn monotone_in_margin() {
        // Enlarging the margin never drops points.
        let pts: Vec<[f64; 3]> = (0..100)
            .map(|i| {
                let t = f64::from(i) / 100.0;
                [t, 1.0 - t, (t - 0.5) * 0.3]
            })
            .collect();
        let small = extract_sketch_instance(&pts, &identity_ext(0.5, 0.0));
        let large = extract_sketch_instance(&pts, &identity_ext(1.0, 0.0));
        for idx in &small.indices {
            assert!(large.indices.contains(idx));
        }
    }

    #[test]
    fn projected_corners_pass_their_own_box_test() {
        // Eq-consistency: the three projected corners lie inside the box
        // even with zero margin, for rotated poses too.
        for euler in [[0.0; 3], [0.4, -0.2, 1.3], [1.0, 2.0, 3.0]] {
            let ext = ExtrusionOp {
                d_plus: 0.3,
                d_minus: 0.1,
                tau: [0.2, 0.5, 0.7],
                euler,
                sigma: 0.6,
                boolean_op: BooleanOp::New,
            };
            let pose = Pose::from_extrusion(&ext).unwrap();
            let corners = super::super::pose::project_unit_bbox(&ext).unwrap();
            for c in 0..3 {
                let p = [corners[0][c], corners[1][c], corners[2][c]];
                assert!(
                    instance_box_contains(&pose, 0.0, &p),
                    "corner {c} {euler:?}"
                );
            }
        }
    }
}

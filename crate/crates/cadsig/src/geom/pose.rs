//! Sketch-plane pose: rotation, translation, and in-plane scale.

use crate::lang::ExtrusionOp;

use super::GeomError;

/// Row-major 3x3 matrix.
pub type Mat3 = [[f64; 3]; 3];

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_apply(m: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

/// Rotation from Euler angles: `R = R_z(gamma) . R_y(phi) . R_x(theta)`.
pub fn euler_to_rotation(theta: f64, phi: f64, gamma: f64) -> Mat3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, ct, -st], [0.0, st, ct]];
    let ry = [[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]];
    let rz = [[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]];
    mat_mul(&rz, &mat_mul(&ry, &rx))
}

/// Rigid pose plus in-plane scale of a sketch plane.
#[derive(Debug, Clone, Copy)]
pub struct Pose {
    pub rotation: Mat3,
    pub tau: [f64; 3],
    pub sigma: f64,
}

impl Pose {
    pub fn from_extrusion(e: &ExtrusionOp) -> Result<Self, GeomError> {
        if e.sigma <= 0.0 {
            return Err(GeomError::Domain(format!(
                "sigma must be positive, got {}",
                e.sigma
            )));
        }
        Ok(Self {
            rotation: euler_to_rotation(e.euler[0], e.euler[1], e.euler[2]),
            tau: e.tau,
            sigma: e.sigma,
        })
    }

    /// Map normalized sketch coordinates `(u, v)` at normal offset `w`
    /// (world units) into world space.
    pub fn sketch_to_world(&self, u: f64, v: f64, w: f64) -> [f64; 3] {
        let local = [u * self.sigma, v * self.sigma, w];
        let r = mat_apply(&self.rotation, &local);
        [r[0] + self.tau[0], r[1] + self.tau[1], r[2] + self.tau[2]]
    }

    /// Inverse of [`Pose::sketch_to_world`]: normalized in-plane coordinates
    /// plus the world-unit normal offset.
    pub fn world_to_sketch(&self, p: &[f64; 3]) -> [f64; 3] {
        let d = [p[0] - self.tau[0], p[1] - self.tau[1], p[2] - self.tau[2]];
        let l = mat_apply(&mat_transpose(&self.rotation), &d);
        [l[0] / self.sigma, l[1] / self.sigma, l[2]]
    }

    /// World-space unit normal of the sketch plane.
    pub fn normal(&self) -> [f64; 3] {
        mat_apply(&self.rotation, &[0.0, 0.0, 1.0])
    }
}

/// Project the unit bounding box of the xy-plane onto the sketch plane.
///
/// Columns of the result are the projected corners of
/// `U = [(0,0,0), (0,1,0), (1,0,0)]` under `R (U sigma) + tau`.
pub fn project_unit_bbox(e: &ExtrusionOp) -> Result<Mat3, GeomError> {
    let pose = Pose::from_extrusion(e)?;
    let corners = [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
    let mut out = [[0.0; 3]; 3];
    for (c, corner) in corners.iter().enumerate() {
        let w = pose.sketch_to_world(corner[0], corner[1], corner[2]);
        for r in 0..3 {
            out[r][c] = w[r];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::BooleanOp;
    use std::f64::consts::FRAC_PI_2;

    fn ext(tau: [f64; 3], euler: [f64; 3], sigma: f64) -> ExtrusionOp {
        ExtrusionOp {
            d_plus: 0.5,
            d_minus: 0.0,
            tau,
            euler,
            sigma,
            boolean_op: BooleanOp::New,
        }
    }

    fn assert_mat_close(a: &Mat3, b: &Mat3, tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (a[i][j] - b[i][j]).abs() < tol,
                    "entry ({i},{j}): {} vs {}",
                    a[i][j],
                    b[i][j]
                );
            }
        }
    }

    #[test]
    fn zero_angles_give_identity() {
        let r = euler_to_rotation(0.0, 0.0, 0.0);
        assert_mat_close(
            &r,
            &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            1e-15,
        );
    }

    #[test]
    fn quarter_turn_about_z_maps_x_to_y() {
        let r = euler_to_rotation(0.0, 0.0, FRAC_PI_2);
        let v = mat_apply(&r, &[1.0, 0.0, 0.0]);
        assert!((v[0]).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12 && v[2].abs() < 1e-12);
    }

    #[test]
    fn composed_rotation_matches_axis_composition_oracle() {
        // Oracle: numerically compose R_y(pi/2) R_x(pi/2) and apply to e_z.
        let rx = euler_to_rotation(FRAC_PI_2, 0.0, 0.0);
        let ry = euler_to_rotation(0.0, FRAC_PI_2, 0.0);
        let oracle = mat_apply(&mat_mul(&ry, &rx), &[0.0, 0.0, 1.0]);
        let r = euler_to_rotation(FRAC_PI_2, FRAC_PI_2, 0.0);
        let got = mat_apply(&r, &[0.0, 0.0, 1.0]);
        for k in 0..3 {
            assert!((got[k] - oracle[k]).abs() < 1e-12);
        }
        // R_x(pi/2): e_z -> -e_y; R_y(pi/2): -e_y -> -e_y.
        assert!((got[0]).abs() < 1e-12 && (got[1] + 1.0).abs() < 1e-12 && got[2].abs() < 1e-12);
    }

    #[test]
    fn rotations_are_orthonormal_with_unit_determinant() {
        for (t, p, gm) in [(0.3, -1.2, 2.5), (1.0, 0.5, -0.4), (6.0, 3.0, 1.5)] {
            let r = euler_to_rotation(t, p, gm);
            let rt_r = mat_mul(&mat_transpose(&r), &r);
            assert_mat_close(
                &rt_r,
                &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                1e-9,
            );
            let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
                - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
                + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
            assert!((det - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_pose_projects_unit_corners() {
        let up = project_unit_bbox(&ext([0.0; 3], [0.0; 3], 1.0)).unwrap();
        let expect = [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        assert_mat_close(&up, &expect, 1e-15);
    }

    #[test]
    fn scaled_translated_projection() {
        let up = project_unit_bbox(&ext([1.0, 1.0, 1.0], [0.0; 3], 2.0)).unwrap();
        // Corners (1,1,1), (1,3,1), (3,1,1) as columns.
        let expect = [[1.0, 1.0, 3.0], [1.0, 3.0, 1.0], [1.0, 1.0, 1.0]];
        assert_mat_close(&up, &expect, 1e-15);
    }

    #[test]
    fn rotated_projection_matches_rotation_oracle() {
        let e = ext([0.2, 0.3, 0.4], [0.7, -0.2, 1.1], 1.5);
        let up = project_unit_bbox(&e).unwrap();
        let r = euler_to_rotation(0.7, -0.2, 1.1);
        for (c, corner) in [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]
            .iter()
            .enumerate()
        {
            let scaled = [corner[0] * 1.5, corner[1] * 1.5, corner[2] * 1.5];
            let rotated = mat_apply(&r, &scaled);
            for row in 0..3 {
                assert!((up[row][c] - (rotated[row] + e.tau[row])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_positive_sigma_rejected() {
        assert!(project_unit_bbox(&ext([0.0; 3], [0.0; 3], 0.0)).is_err());
        assert!(project_unit_bbox(&ext([0.0; 3], [0.0; 3], -1.0)).is_err());
    }

    #[test]
    fn world_round_trip() {
        let pose = Pose::from_extrusion(&ext([0.1, 0.2, 0.3], [0.4, 0.5, 0.6], 0.7)).unwrap();
        let w = pose.sketch_to_world(0.25, 0.75, 0.1);
        let s = pose.world_to_sketch(&w);
        assert!((s[0] - 0.25).abs() < 1e-12);
        assert!((s[1] - 0.75).abs() < 1e-12);
        assert!((s[2] - 0.1).abs() < 1e-12);
    }
}

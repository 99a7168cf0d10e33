//! Per-point normal estimation by PCA over nearest neighbors.

use rayon::prelude::*;

use super::GeomError;

const K_PCA: usize = 16;

/// Estimate unit normals for every point: PCA over the 16 nearest
/// neighbors, normal = least-variance eigenvector, sign fixed toward +z
/// (ties broken toward +x, then +y).
///
/// Degrades to `k = N - 1` below 17 points; errors below 4 points.
pub fn estimate_normals(points: &[[f64; 3]]) -> Result<Vec<[f64; 3]>, GeomError> {
    let n = points.len();
    if n < 4 {
        return Err(GeomError::NotEnoughPoints { needed: 4, got: n });
    }
    let k = K_PCA.min(n - 1);
    let normals: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let neigh = k_nearest(points, i, k);
            let mut cov = [[0.0f64; 3]; 3];
            let mut mean = [0.0f64; 3];
            let members = neigh.iter().copied().chain(std::iter::once(i));
            let count = (k + 1) as f64;
            for j in members.clone() {
                for d in 0..3 {
                    mean[d] += points[j][d];
                }
            }
            for m in &mut mean {
                *m /= count;
            }
            for j in members {
                let d = [
                    points[j][0] - mean[0],
                    points[j][1] - mean[1],
                    points[j][2] - mean[2],
                ];
                for r in 0..3 {
                    for c in 0..3 {
                        cov[r][c] += d[r] * d[c];
                    }
                }
            }
            let (_evals, evecs, min_idx) = smallest_eigenvector(&cov);
            let mut normal = [evecs[0][min_idx], evecs[1][min_idx], evecs[2][min_idx]];
            let len = (normal[0].powi(2) + normal[1].powi(2) + normal[2].powi(2)).sqrt();
            if len > 0.0 {
                for v in &mut normal {
                    *v /= len;
                }
            } else {
                normal = [0.0, 0.0, 1.0];
            }
            fix_sign(&mut normal);
            normal
        })
        .collect();
    Ok(normals)
}

fn fix_sign(normal: &mut [f64; 3]) {
    const TOL: f64 = 1e-12;
    let flip = if normal[2].abs() > TOL {
        normal[2] < 0.0
    } else if normal[0].abs() > TOL {
        normal[0] < 0.0
    } else {
        normal[1] < 0.0
    };
    if flip {
        for v in normal.iter_mut() {
            *v = -*v;
        }
    }
}

fn k_nearest(points: &[[f64; 3]], i: usize, k: usize) -> Vec<usize> {
    let p = points[i];
    let mut dists: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, q)| {
            let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
            (d, j)
        })
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    dists.truncate(k);
    dists.into_iter().map(|(_, j)| j).collect()
}

/// Jacobi eigen decomposition of a symmetric 3x3 matrix; returns
/// (eigenvalues, eigenvector columns, index of the smallest eigenvalue).
fn smallest_eigenvector(m: &[[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3], usize) {
    let mut a = *m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..64 {
        // Largest off-diagonal element.
        let (mut p, mut q, mut max) = (0, 1, a[0][1].abs());
        if a[0][2].abs() > max {
            p = 0;
            q = 2;
            max = a[0][2].abs();
        }
        if a[1][2].abs() > max {
            p = 1;
            q = 2;
            max = a[1][2].abs();
        }
        if max < 1e-14 {
            break;
        }
        let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        let mut rot = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        rot[p][p] = c;
        rot[q][q] = c;
        rot[p][q] = s;
        rot[q][p] = -s;
        a = super::pose::mat_mul(
            &super::pose::mat_transpose(&rot),
            &super::pose::mat_mul(&a, &rot),
        );
        v = super::pose::mat_mul(&v, &rot);
    }
    let evals = [a[0][0], a[1][1], a[2][2]];
    let mut min_idx = 0;
    for i in 1..3 {
        if evals[i] < evals[min_idx] {
            min_idx = i;
        }
    }
    (evals, v, min_idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn planar_cloud_normals_point_up() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let pts: Vec<[f64; 3]> = (0..200)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>(), 0.0])
            .collect();
        let normals = estimate_normals(&pts).unwrap();
        for n in normals {
            assert!((n[2] - 1.0).abs() < 1e-9, "{n:?}");
        }
    }

    #[test]
    fn normals_are_unit_length() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let pts: Vec<[f64; 3]> = (0..100)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        for n in estimate_normals(&pts).unwrap() {
            let len = (n[0].powi(2) + n[1].powi(2) + n[2].powi(2)).sqrt();
            assert!((len - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cube_face_normals_mostly_align() {
        // Synthetic cube oracle: sample the six faces at the production
        // density (~8k points) and require >=95% of face-interior normals
        // within 10 degrees of the true face normal. Points near the cube
        // edges are excluded — their k-NN sets straddle two faces, where a
        // surface normal is not defined.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let per_face = 1365;
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for axis in 0..3 {
            for &level in &[0.0, 1.0] {
                for _ in 0..per_face {
                    let mut p = [
                        rng.random::<f64>(),
                        rng.random::<f64>(),
                        rng.random::<f64>(),
                    ];
                    p[axis] = level;
                    pts.push(p);
                    let mut n = [0.0; 3];
                    n[axis] = 1.0;
                    truth.push(n);
                }
            }
        }
        // Expected neighbor radius at this density, with headroom.
        let margin = 2.0 * (17.0 / (std::f64::consts::PI * per_face as f64)).sqrt();
        let normals = estimate_normals(&pts).unwrap();
        let cos10 = 10.0_f64.to_radians().cos();
        let mut interior = 0usize;
        let mut good = 0usize;
        for ((p, n), t) in pts.iter().zip(&normals).zip(&truth) {
            let in_plane: Vec<f64> = (0..3).filter(|k| t[*k] == 0.0).map(|k| p[k]).collect();
            if in_plane.iter().any(|c| *c < margin || *c > 1.0 - margin) {
                continue;
            }
            interior += 1;
            let dot = n[0] * t[0] + n[1] * t[1] + n[2] * t[2];
            if dot.abs() >= cos10 {
                good += 1;
            }
        }
        assert!(interior > 3000, "margin left too few interior samples");
        let frac = good as f64 / interior as f64;
        assert!(
            frac >= 0.95,
            "only {frac} aligned over {interior} interior points"
        );
    }

    #[test]
    fn small_clouds_degrade_then_error() {
        let pts: Vec<[f64; 3]> = (0..8)
            .map(|i| [f64::from(i) * 0.1, f64::from(i % 3) * 0.2, 0.0])
            .collect();
        assert!(estimate_normals(&pts).is_ok());
        assert!(matches!(
            estimate_normals(&pts[..3]),
            Err(GeomError::NotEnoughPoints { .. })
        ));
    }
}

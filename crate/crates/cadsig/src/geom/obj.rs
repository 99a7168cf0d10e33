//! Wavefront OBJ export of the tessellated solid boundary.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use super::solid::Solid;
use super::GeomError;

/// Grid resolution for cap triangulation.
const CAP_GRID: usize = 96;

/// Export the boundary of a solid as triangles: wall quads from tessellated
/// loop segments and caps rasterized on a membership grid, both filtered by
/// the final-solid boundary test at the triangle centroid.
pub fn export_obj(solid: &Solid, path: &Path) -> Result<(usize, usize), GeomError> {
    let eps = solid.boundary_eps();
    let mut mesh = MeshBuilder::default();

    for prim in &solid.prims {
        // Walls.
        for face in &prim.region.faces {
            for poly in &face.loops {
                let n = poly.len();
                for i in 0..n {
                    let a = poly[i];
                    let b = poly[(i + 1) % n];
                    let q = [
                        prim.pose.sketch_to_world(a.x, a.y, -prim.d_minus),
                        prim.pose.sketch_to_world(b.x, b.y, -prim.d_minus),
                        prim.pose.sketch_to_world(b.x, b.y, prim.d_plus),
                        prim.pose.sketch_to_world(a.x, a.y, prim.d_plus),
                    ];
                    mesh.quad_if_on_boundary(solid, &q, eps);
                }
            }
        }
        // Caps on a membership grid over the region bbox.
        let bb = &prim.region.bbox;
        let (w, h) = (bb.max.x - bb.min.x, bb.max.y - bb.min.y);
        if w <= 0.0 || h <= 0.0 {
            continue;
        }
        for &z in &[prim.d_plus, -prim.d_minus] {
            for i in 0..CAP_GRID {
                for j in 0..CAP_GRID {
                    let u0 = bb.min.x + w * i as f64 / CAP_GRID as f64;
                    let u1 = bb.min.x + w * (i + 1) as f64 / CAP_GRID as f64;
                    let v0 = bb.min.y + h * j as f64 / CAP_GRID as f64;
                    let v1 = bb.min.y + h * (j + 1) as f64 / CAP_GRID as f64;
                    if !prim.region.contains(0.5 * (u0 + u1), 0.5 * (v0 + v1)) {
                        continue;
                    }
                    let q = [
                        prim.pose.sketch_to_world(u0, v0, z),
                        prim.pose.sketch_to_world(u1, v0, z),
                        prim.pose.sketch_to_world(u1, v1, z),
                        prim.pose.sketch_to_world(u0, v1, z),
                    ];
                    mesh.quad_if_on_boundary(solid, &q, eps);
                }
            }
        }
    }

    mesh.write(path)
}

#[derive(Default)]
struct MeshBuilder {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[u32; 3]>,
    index: HashMap<[u64; 3], u32>,
}

impl MeshBuilder {
    fn vertex(&mut self, p: [f64; 3]) -> u32 {
        let key = [p[0].to_bits(), p[1].to_bits(), p[2].to_bits()];
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.vertices.len() as u32;
        self.vertices.push(p);
        self.index.insert(key, i);
        i
    }

    fn quad_if_on_boundary(&mut self, solid: &Solid, q: &[[f64; 3]; 4], eps: f64) {
        let centroid = [
            (q[0][0] + q[1][0] + q[2][0] + q[3][0]) / 4.0,
            (q[0][1] + q[1][1] + q[2][1] + q[3][1]) / 4.0,
            (q[0][2] + q[1][2] + q[2][2] + q[3][2]) / 4.0,
        ];
        let n = quad_normal(q);
        if !solid.on_boundary(&centroid, &n, eps) {
            return;
        }
        let idx = [
            self.vertex(q[0]),
            self.vertex(q[1]),
            self.vertex(q[2]),
            self.vertex(q[3]),
        ];
        self.faces.push([idx[0], idx[1], idx[2]]);
        self.faces.push([idx[0], idx[2], idx[3]]);
    }

    fn write(&self, path: &Path) -> Result<(usize, usize), GeomError> {
        let io_err = |e: std::io::Error| GeomError::Io(format!("{}: {e}", path.display()));
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        for v in &self.vertices {
            writeln!(f, "v {} {} {}", v[0], v[1], v[2]).map_err(io_err)?;
        }
        for face in &self.faces {
            writeln!(f, "f {} {} {}", face[0] + 1, face[1] + 1, face[2] + 1).map_err(io_err)?;
        }
        Ok((self.vertices.len(), self.faces.len()))
    }
}

fn quad_normal(q: &[[f64; 3]; 4]) -> [f64; 3] {
    let e1 = [q[1][0] - q[0][0], q[1][1] - q[0][1], q[1][2] - q[0][2]];
    let e2 = [q[3][0] - q[0][0], q[3][1] - q[0][1], q[3][2] - q[0][2]];
    let n = [
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
    ];
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if len > 0.0 {
        [n[0] / len, n[1] / len, n[2] / len]
    } else {
        [0.0, 0.0, 1.0]
    }
}

//! Point-cloud normalization and binary PLY IO.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::GeomError;

/// Axis-aligned 3D bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bbox3 {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bbox3 {
    pub fn of(points: &[[f64; 3]]) -> Option<Bbox3> {
        let first = points.first()?;
        let mut bb = Bbox3 {
            min: *first,
            max: *first,
        };
        for p in points {
            for k in 0..3 {
                bb.min[k] = bb.min[k].min(p[k]);
                bb.max[k] = bb.max[k].max(p[k]);
            }
        }
        Some(bb)
    }

    pub fn max_extent(&self) -> f64 {
        (0..3)
            .map(|k| self.max[k] - self.min[k])
            .fold(0.0, f64::max)
    }
}

/// Translate the min corner to the origin and scale uniformly so the
/// largest extent becomes 1. Aspect ratios are preserved.
pub fn normalize_to_unit_box(points: &[[f64; 3]]) -> Result<Vec<[f64; 3]>, GeomError> {
    let bb = Bbox3::of(points).ok_or(GeomError::DegenerateCloud)?;
    let extent = bb.max_extent();
    if extent <= 0.0 {
        return Err(GeomError::DegenerateCloud);
    }
    Ok(points
        .iter()
        .map(|p| {
            [
                (p[0] - bb.min[0]) / extent,
                (p[1] - bb.min[1]) / extent,
                (p[2] - bb.min[2]) / extent,
            ]
        })
        .collect())
}

/// Write a binary little-endian PLY with positions and optional normals.
pub fn write_ply(
    path: &Path,
    points: &[[f64; 3]],
    normals: Option<&[[f64; 3]]>,
) -> Result<(), GeomError> {
    if let Some(n) = normals {
        if n.len() != points.len() {
            return Err(GeomError::Domain(format!(
                "normal count {} does not match point count {}",
                n.len(),
                points.len()
            )));
        }
    }
    let io_err = |e: std::io::Error| GeomError::Io(format!("{}: {e}", path.display()));
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    let mut header = String::new();
    header.push_str("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", points.len()));
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if normals.is_some() {
        header.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    header.push_str("end_header\n");
    f.write_all(header.as_bytes()).map_err(io_err)?;
    for (i, p) in points.iter().enumerate() {
        for v in p {
            f.write_all(&(*v as f32).to_le_bytes()).map_err(io_err)?;
        }
        if let Some(ns) = normals {
            for v in &ns[i] {
                f.write_all(&(*v as f32).to_le_bytes()).map_err(io_err)?;
            }
        }
    }
    Ok(())
}

/// Read a PLY written by [`write_ply`]: positions plus normals when present.
pub fn read_ply(path: &Path) -> Result<(Vec<[f64; 3]>, Option<Vec<[f64; 3]>>), GeomError> {
    let io_err = |e: std::io::Error| GeomError::Io(format!("{}: {e}", path.display()));
    let bad = |msg: &str| GeomError::Io(format!("{}: {msg}", path.display()));
    let mut reader = BufReader::new(std::fs::File::open(path).map_err(io_err)?);

    let mut line = String::new();
    reader.read_line(&mut line).map_err(io_err)?;
    if line.trim() != "ply" {
        return Err(bad("missing ply magic"));
    }
    let mut vertex_count = 0usize;
    let mut props: Vec<String> = Vec::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).map_err(io_err)? == 0 {
            return Err(bad("truncated header"));
        }
        let l = line.trim();
        if l == "end_header" {
            break;
        } else if l.starts_with("format") {
            if l != "format binary_little_endian 1.0" {
                return Err(bad("unsupported ply format"));
            }
        } else if let Some(rest) = l.strip_prefix("element vertex ") {
            vertex_count = rest.parse().map_err(|_| bad("bad vertex count"))?;
        } else if l.starts_with("element ") {
            return Err(bad("unsupported ply element"));
        } else if let Some(rest) = l.strip_prefix("property float ") {
            props.push(rest.to_string());
        } else if l.starts_with("property") {
            return Err(bad("unsupported ply property type"));
        }
    }
    let has_normals = match props.as_slice() {
        [x, y, z] if x == "x" && y == "y" && z == "z" => false,
        [x, y, z, nx, ny, nz]
            if x == "x" && y == "y" && z == "z" && nx == "nx" && ny == "ny" && nz == "nz" =>
        {
            true
        }
        _ => return Err(bad("unsupported ply property layout")),
    };
    let stride = props.len();
    let mut raw = vec![0u8; vertex_count * stride * 4];
    reader.read_exact(&mut raw).map_err(io_err)?;
    let mut points = Vec::with_capacity(vertex_count);
    let mut normals = has_normals.then(|| Vec::with_capacity(vertex_count));
    for i in 0..vertex_count {
        let at = |j: usize| -> f64 {
            let o = (i * stride + j) * 4;
            f64::from(f32::from_le_bytes([
                raw[o],
                raw[o + 1],
                raw[o + 2],
                raw[o + 3],
            ]))
        };
        points.push([at(0), at(1), at(2)]);
        if let Some(ns) = normals.as_mut() {
            ns.push([at(3), at(4), at(5)]);
        }
    }
    Ok((points, normals))
}

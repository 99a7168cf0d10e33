//! Sampled-solid geometry kernel.
//!
//! Programs evaluate into membership oracles plus boundary point samples
//! rather than boundary representations: extrusions become point-in-region
//! tests on tessellated sketches, booleans compose membership functions,
//! and surfaces are sampled by area-weighted draws filtered through a
//! two-sided boundary test.

mod cloud;
mod instance;
mod normals;
mod obj;
mod pose;
mod region;
mod solid;

pub use cloud::{normalize_to_unit_box, read_ply, write_ply, Bbox3};
pub use instance::{extract_sketch_instance, instance_box_contains, SketchInstance};
pub use normals::estimate_normals;
pub use obj::export_obj;
pub use pose::{euler_to_rotation, project_unit_bbox, Mat3, Pose};
pub use region::SketchRegion;
pub use solid::{
    build_solid, evaluate_program, sample_sketch_plane_cap, BoundaryPoint, Solid, SolidSample,
};

use thiserror::Error;

/// Errors from the geometry kernel. Geometric invalidity of a program is
/// not an error — [`evaluate_program`] reports it through
/// [`SolidSample::valid`] — these cover contract violations and IO.
#[derive(Debug, Error)]
pub enum GeomError {
    #[error("{0}")]
    Domain(String),
    #[error("point cloud has degenerate extent")]
    DegenerateCloud,
    #[error("need at least {needed} points, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },
    #[error("io: {0}")]
    Io(String),
}

//! Sketch-plane projection and sketch-instance extraction.
//!
//! Shows the projected unit-box corners for a posed extrusion and which
//! input points fall inside the margin-enlarged instance box per step.
//!
//! Run with: `cargo run --example sketch_instances`

use cadsig::geom::{extract_sketch_instance, project_unit_bbox};
use cadsig::pipeline::feature_matrix;
use cadsig::synth::{generate_sample, GeneratorConfig};

fn main() -> anyhow::Result<()> {
    let gen = GeneratorConfig {
        splits: (4, 0, 0),
        n_points: 1024,
        max_steps: 3,
        ..Default::default()
    };
    let sample = generate_sample(&gen, 2)?;
    println!(
        "sample {}: {} steps, {} cloud points",
        sample.id,
        sample.program.steps.len(),
        sample.points.len()
    );

    for (l, step) in sample.program.steps.iter().enumerate() {
        let e = &step.extrusion;
        let corners = project_unit_bbox(e)?;
        println!(
            "step {} ({:?}): projected corners (columns) =",
            l + 1,
            e.boolean_op
        );
        for row in corners {
            println!("    [{:>7.3} {:>7.3} {:>7.3}]", row[0], row[1], row[2]);
        }
        let inst = extract_sketch_instance(&sample.points, e);
        println!(
            "    instance: {} of {} points inside (normal margin {:.4})",
            inst.count(),
            sample.points.len(),
            inst.margin
        );
    }

    // The instance indices drive the attention mask; the feature matrix is
    // what the network actually consumes.
    let feats = feature_matrix(&sample.points, &sample.normals);
    println!(
        "network input: {} x {} feature matrix",
        feats.rows, feats.cols
    );
    Ok(())
}

//! Evaluate a program into a solid, probe it, and export mesh + cloud.
//!
//! Run with: `cargo run --example evaluate_solid`

use cadsig::geom::{build_solid, evaluate_program, export_obj, write_ply};
use cadsig::lang::{BooleanOp, CadProgram, Curve, ExtrusionOp, Face, Loop, Point2, Sketch, Step};

fn square(x0: f64, y0: f64, s: f64) -> Loop {
    let pts = [
        Point2::new(x0, y0),
        Point2::new(x0 + s, y0),
        Point2::new(x0 + s, y0 + s),
        Point2::new(x0, y0 + s),
    ];
    Loop {
        curves: (0..4)
            .map(|i| Curve::Line {
                start: pts[i],
                end: pts[(i + 1) % 4],
            })
            .collect(),
    }
}

fn main() -> anyhow::Result<()> {
    // L-bracket: a base slab joined with a vertical wall, then a slot cut.
    let program = CadProgram {
        steps: vec![
            Step {
                extrusion: ExtrusionOp {
                    d_plus: 0.2,
                    d_minus: 0.0,
                    tau: [0.05, 0.05, 0.05],
                    euler: [0.0; 3],
                    sigma: 0.9,
                    boolean_op: BooleanOp::New,
                },
                sketch: Sketch {
                    faces: vec![Face {
                        loops: vec![square(0.0, 0.0, 1.0)],
                    }],
                },
            },
            Step {
                extrusion: ExtrusionOp {
                    d_plus: 0.6,
                    d_minus: 0.0,
                    tau: [0.05, 0.05, 0.05],
                    euler: [0.0; 3],
                    sigma: 0.9,
                    boolean_op: BooleanOp::Join,
                },
                sketch: Sketch {
                    faces: vec![Face {
                        loops: vec![square(0.0, 0.0, 0.3)],
                    }],
                },
            },
            Step {
                extrusion: ExtrusionOp {
                    d_plus: 0.1,
                    d_minus: 0.0,
                    tau: [0.45, 0.3, 0.1],
                    euler: [0.0; 3],
                    sigma: 0.35,
                    boolean_op: BooleanOp::Cut,
                },
                sketch: Sketch {
                    faces: vec![Face {
                        loops: vec![square(0.0, 0.0, 1.0)],
                    }],
                },
            },
        ],
    };

    let sample = evaluate_program(&program, 4096, 42);
    println!("valid: {} {}", sample.valid, sample.diag);
    for (p, label) in [
        ([0.5, 0.5, 0.15], "inside base slab"),
        ([0.15, 0.15, 0.6], "inside wall"),
        ([0.5, 0.4, 0.15], "inside cut region"),
        ([0.9, 0.9, 0.9], "far corner"),
    ] {
        println!("  membership{p:?} = {:<5} ({label})", sample.membership(&p));
    }

    std::fs::create_dir_all("out")?;
    let positions = sample.positions();
    let normals: Vec<[f64; 3]> = sample.boundary.iter().map(|b| b.normal).collect();
    write_ply(
        std::path::Path::new("out/bracket.ply"),
        &positions,
        Some(&normals),
    )?;
    println!(
        "wrote out/bracket.ply ({} boundary points)",
        positions.len()
    );

    let solid = build_solid(&program).expect("validated above");
    let (v, f) = export_obj(&solid, std::path::Path::new("out/bracket.obj"))?;
    println!("wrote out/bracket.obj ({v} vertices, {f} triangles)");
    Ok(())
}

//! Tokenize a small design history, inspect its stream, and parse it back.
//!
//! Run with: `cargo run --example tokenize_roundtrip`

use cadsig::lang::{
    encode_matrices, program_to_stream, read_stream, reorder_and_orient, stream_to_program,
    write_stream, BooleanOp, CadProgram, Curve, ExtrusionOp, Face, Loop, Point2, Sketch, Step,
};

fn main() -> anyhow::Result<()> {
    // A plate with a circular hole, cut by a second extrusion.
    let plate = Sketch {
        faces: vec![Face {
            loops: vec![Loop {
                curves: vec![
                    Curve::Line {
                        start: Point2::new(0.0, 0.0),
                        end: Point2::new(1.0, 0.0),
                    },
                    Curve::Line {
                        start: Point2::new(1.0, 0.0),
                        end: Point2::new(1.0, 1.0),
                    },
                    Curve::Line {
                        start: Point2::new(1.0, 1.0),
                        end: Point2::new(0.0, 1.0),
                    },
                    Curve::Line {
                        start: Point2::new(0.0, 1.0),
                        end: Point2::new(0.0, 0.0),
                    },
                ],
            }],
        }],
    };
    let hole = Sketch {
        faces: vec![Face {
            loops: vec![Loop {
                curves: vec![Curve::Circle {
                    center: Point2::new(0.5, 0.5),
                    top: Point2::new(0.5, 0.7),
                }],
            }],
        }],
    };
    let program = CadProgram {
        steps: vec![
            Step {
                extrusion: ExtrusionOp {
                    d_plus: 0.2,
                    d_minus: 0.0,
                    tau: [0.0; 3],
                    euler: [0.0; 3],
                    sigma: 0.6,
                    boolean_op: BooleanOp::New,
                },
                sketch: reorder_and_orient(&plate)?,
            },
            Step {
                extrusion: ExtrusionOp {
                    d_plus: 0.2,
                    d_minus: 0.0,
                    tau: [0.0; 3],
                    euler: [0.0; 3],
                    sigma: 0.6,
                    boolean_op: BooleanOp::Cut,
                },
                sketch: reorder_and_orient(&hole)?,
            },
        ],
    }
    .quantized()?;

    let stream = program_to_stream(&program)?;
    println!("stream length: {} tokens", stream.true_len());
    for pos in 0..stream.true_len().min(16) {
        let t = stream.token_at(pos);
        println!(
            "  pos {pos:>2}: ({:>3}, {:>3})  flag {:>2}  step {}",
            t.a,
            t.b,
            stream.flag_at(pos),
            stream.step_at(pos)
        );
    }

    let matrices = encode_matrices(&stream);
    println!(
        "one-hot matrix: {} x {} (pad rows: {})",
        cadsig::lang::MAX_TOKENS,
        2 * cadsig::lang::VOCAB,
        matrices.pad_mask.iter().filter(|p| **p).count()
    );

    let back = stream_to_program(&stream)?;
    assert_eq!(back, program, "round trip must be the identity");
    println!(
        "parse round trip: identical program ({} curves)",
        program.curve_count()
    );

    std::fs::create_dir_all("out")?;
    let path = std::path::Path::new("out/roundtrip.tokens");
    write_stream(&stream, path)?;
    let loaded = read_stream(path)?;
    assert_eq!(loaded, stream);
    println!("binary stream round trip via {}", path.display());
    Ok(())
}

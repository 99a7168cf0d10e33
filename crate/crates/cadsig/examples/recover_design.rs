//! Recover a design history from a point cloud with hybrid sampling.
//!
//! Uses the checkpoint written by the `train_tiny` example when present
//! (run that first for meaningful output); otherwise decodes with fresh
//! random weights to show the machinery.
//!
//! Run with: `cargo run --example recover_design`

use cadsig::lang::{stream_from_tokens, Token2D, CLS, PAD};
use cadsig::net::{Model, ModelConfig};
use cadsig::pipeline::{decode, feature_matrix, Sampling};
use cadsig::synth::{generate_sample, GeneratorConfig};

fn main() -> anyhow::Result<()> {
    let gen = GeneratorConfig {
        splits: (16, 0, 0),
        n_points: 256,
        max_steps: 2,
        ..Default::default()
    };
    let target = generate_sample(&gen, 3)?;
    println!(
        "target: {} steps, {} curves",
        target.program.steps.len(),
        target.curve_count
    );

    let ckpt = std::path::Path::new("out/tiny-run/checkpoints/latest.ckpt");
    let model = if ckpt.exists() {
        println!("loading {}", ckpt.display());
        Model::<f32>::load(ckpt)?
    } else {
        println!("no checkpoint at {}; using random weights", ckpt.display());
        let mut cfg = ModelConfig::tiny();
        cfg.n_points = 256;
        Model::<f32>::init(&cfg)
    };

    let feats = feature_matrix(&target.points, &target.normals);
    let prefix = stream_from_tokens(vec![Token2D::new(CLS, PAD)]);
    let result = decode(&model, &feats, &prefix, Sampling::Hybrid(5), 1024, 0)?;
    println!("candidates (branch rank, validity, CD x1e3):");
    for (i, c) in result.candidates.iter().enumerate() {
        let marker = if i == result.selected { "->" } else { "  " };
        let cd = if c.cd_to_input.is_finite() {
            format!("{:.3}", c.cd_to_input * 1e3)
        } else {
            "inf".to_string()
        };
        println!(
            "{marker} [{i}] valid={:<5} cd={cd:<9} {} tokens {}",
            c.valid,
            c.stream.true_len(),
            c.diag
        );
    }
    if let Some(program) = &result.selected_candidate().program {
        println!(
            "selected program: {} steps, {} curves",
            program.steps.len(),
            program.curve_count()
        );
    }
    Ok(())
}

//! Conditional auto-completion: give the first design step, let the model
//! finish, and report the completion-over-input CD ratio. Also previews
//! step-wise candidates the interactive mode offers.
//!
//! Run with: `cargo run --example autocomplete_step`
//! (best after `cargo run --example train_tiny`)

use cadsig::lang::{program_to_stream, stream_from_tokens, Token2D, CLS, PAD};
use cadsig::net::{Model, ModelConfig};
use cadsig::pipeline::{autocomplete, feature_matrix, next_step_candidates, Sampling};
use cadsig::synth::{generate_sample, GeneratorConfig};

fn main() -> anyhow::Result<()> {
    let gen = GeneratorConfig {
        splits: (16, 0, 0),
        n_points: 256,
        max_steps: 2,
        ..Default::default()
    };
    let target = generate_sample(&gen, 5)?;
    let feats = feature_matrix(&target.points, &target.normals);

    let ckpt = std::path::Path::new("out/tiny-run/checkpoints/latest.ckpt");
    let model = if ckpt.exists() {
        Model::<f32>::load(ckpt)?
    } else {
        println!("hint: run the train_tiny example first for a trained model");
        let mut cfg = ModelConfig::tiny();
        cfg.n_points = 256;
        Model::<f32>::init(&cfg)
    };

    // The ground-truth first step as the user-given prefix.
    let full = program_to_stream(&target.program)?;
    let mut given_tokens = Vec::new();
    let mut seen_sketch_end = false;
    for pos in 0..full.true_len() {
        let tok = full.token_at(pos);
        given_tokens.push(tok);
        if pos > 0 && tok.a == cadsig::lang::E_S {
            seen_sketch_end = true;
            break;
        }
    }
    anyhow::ensure!(seen_sketch_end, "target has no complete first step");
    let given = stream_from_tokens(given_tokens);
    println!("given prefix: {} tokens (first step)", given.true_len());

    let res = autocomplete(&model, &feats, &given, Sampling::Hybrid(5), 1024, 0)?;
    println!("CD(completed, target) x1e3 = {:.3}", res.cd_pred_gt * 1e3);
    println!("CD(prefix-only, target) x1e3 = {:.3}", res.cd_in_gt * 1e3);
    match res.ratio {
        Some(r) => println!(
            "CD ratio = {r:.3} ({} candidates)",
            res.decode.candidates.len()
        ),
        None => println!("CD ratio undefined (invalid prefix or no valid completion)"),
    }

    // What the interactive session would offer from a bare start.
    let ctx = stream_from_tokens(vec![Token2D::new(CLS, PAD)]);
    let candidates = next_step_candidates(&model, &feats, &ctx, 3, 512, 0)?;
    println!("first-step candidates:");
    for (i, c) in candidates.iter().enumerate() {
        let cd = if c.preview_cd.is_finite() {
            format!("{:.3}", c.preview_cd * 1e3)
        } else {
            "inf".to_string()
        };
        println!(
            "  [{}] {} tokens, ends={}, preview CD x1e3 {cd}",
            i + 1,
            c.step_tokens.len(),
            c.ends_design
        );
    }
    Ok(())
}

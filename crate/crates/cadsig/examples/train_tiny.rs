//! Overfit the tiny model on 16 samples and save a checkpoint.
//!
//! Run with: `cargo run --example train_tiny`
//! (a couple of minutes on a laptop; writes out/tiny-run/)

use cadsig::net::{Model, ModelConfig};
use cadsig::pipeline::{train, TrainConfig};
use cadsig::synth::{generate_sample, GeneratorConfig};

fn main() -> anyhow::Result<()> {
    let gen = GeneratorConfig {
        splits: (16, 0, 0),
        n_points: 256,
        max_steps: 2,
        ..Default::default()
    };
    let samples: Vec<_> = (0..16)
        .map(|i| generate_sample(&gen, i))
        .collect::<Result<_, _>>()?;

    let mut cfg = ModelConfig::tiny();
    cfg.n_points = 256;
    let mut model = Model::<f32>::init(&cfg);
    let tcfg = TrainConfig {
        epochs: 300,
        curriculum_epochs: 2,
        batch_size: 16,
        checkpoint_every: 100,
        lr: 3e-3,
        weight_decay: 1e-4,
        ..Default::default()
    };
    let run_dir = std::path::Path::new("out/tiny-run");
    let stats = train(&mut model, &samples, &tcfg, Some(run_dir))?;
    println!(
        "{} steps; final loss {:.4}, teacher-forced token accuracy {:.3}",
        stats.steps, stats.final_loss, stats.final_accuracy
    );
    println!(
        "checkpoints under {}",
        run_dir.join("checkpoints").display()
    );
    println!(
        "training log at {}",
        run_dir.join("logs/train.jsonl").display()
    );
    Ok(())
}

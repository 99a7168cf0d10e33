//! Generate a small synthetic dataset and read it back.
//!
//! Run with: `cargo run --example generate_dataset`

use cadsig::synth::{
    curriculum_order, generate_sample, read_dataset, write_dataset, GeneratorConfig,
};
use rayon::prelude::*;

fn main() -> anyhow::Result<()> {
    let cfg = GeneratorConfig {
        seed: 7,
        splits: (24, 4, 4),
        n_points: 512,
        ..Default::default()
    };
    let total = cfg.total_samples();
    let samples: Vec<_> = (0..total)
        .into_par_iter()
        .map(|i| generate_sample(&cfg, i))
        .collect::<Result<_, _>>()?;

    let histogram = samples.iter().fold([0usize; 11], |mut h, s| {
        h[s.program.steps.len().min(10)] += 1;
        h
    });
    println!("step-count histogram: {histogram:?}");
    let order = curriculum_order(&samples);
    println!(
        "curriculum: first sample has {} curves, last has {}",
        samples[order[0]].curve_count,
        samples[*order.last().unwrap()].curve_count
    );

    let dir = std::path::Path::new("out/dataset");
    write_dataset(&samples, &cfg, dir)?;
    let (manifest, loaded) = read_dataset(dir)?;
    println!(
        "round trip: {} samples, config hash {}",
        loaded.len(),
        manifest.config_hash
    );
    Ok(())
}

//! Run the evaluation metric suite on a small prediction set.
//!
//! Run with: `cargo run --example eval_metrics`

use cadsig::lang::{Curve, Point2};
use cadsig::metrics::{chamfer, evaluate_pairs, match_entity_list, quartiles, EvalPair};
use cadsig::synth::{generate_sample, GeneratorConfig};

fn main() -> anyhow::Result<()> {
    let gen = GeneratorConfig {
        splits: (8, 0, 0),
        n_points: 256,
        ..Default::default()
    };
    let samples: Vec<_> = (0..8)
        .map(|i| generate_sample(&gen, i))
        .collect::<Result<_, _>>()?;

    // Perfect predictions for half the set, degraded ones for the rest:
    // one dropped step, one unparsable output, the remainder intact.
    let pairs: Vec<EvalPair> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let pred = match i % 4 {
                3 => None,
                2 => {
                    let mut p = s.program.clone();
                    if p.steps.len() > 1 {
                        p.steps.pop();
                    } else {
                        // Corrupt the first curve into a degenerate line.
                        p.steps[0].sketch.faces[0].loops[0].curves[0] = Curve::Line {
                            start: Point2::new(0.25, 0.25),
                            end: Point2::new(0.25, 0.25),
                        };
                    }
                    Some(p)
                }
                _ => Some(s.program.clone()),
            };
            EvalPair {
                id: s.id.clone(),
                gt: s.program.clone(),
                pred,
                cd_ratio: (i % 2 == 0).then_some(0.2 + 0.1 * i as f64),
            }
        })
        .collect();

    let report = evaluate_pairs(&pairs, 2048, 9)?;
    print!("{}", report.to_table());
    println!("\nreport JSON:\n{}", serde_json::to_string_pretty(&report)?);

    // The underlying primitives are usable on their own.
    let a = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
    let b = vec![[0.0, 0.1, 0.0], [1.0, 0.1, 0.0]];
    println!("chamfer(a, b) = {:.4}", chamfer(&a, &b)?);
    let q = quartiles(&[0.3, 0.1, 0.9, 0.5, 0.7])?;
    println!("quartiles = {:.2} / {:.2} / {:.2}", q.q1, q.q2, q.q3);
    let first = &samples[0].program.steps[0].sketch.faces[0].loops[0];
    let pairs = match_entity_list(&first.curves, &first.curves);
    println!("self-matched {} curves", pairs.len());
    Ok(())
}

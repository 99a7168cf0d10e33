//! Interactive step-wise design REPL.

use std::io::{BufRead, Write};

use crate::lang::{stream_from_tokens, Token2D, TokenStream, CLS, END, PAD};
use crate::net::Model;
use crate::pipeline::{next_step_candidates, PipelineError, StepCandidate};
use crate::tensor::Array;

/// Drive a step-by-step completion session over arbitrary line-based IO.
///
/// Each round prints up to `k` next-step candidates (plane pose, boolean
/// op, preview CD) and reads the user's pick; `q` quits with the partial
/// design. Returns the final stream and whether the design completed.
pub fn interactive_session<R: BufRead, W: Write>(
    model: &Model<f32>,
    feats: &Array<f64>,
    k: usize,
    n_eval_points: usize,
    seed: u64,
    input: &mut R,
    output: &mut W,
) -> Result<(TokenStream, bool), PipelineError> {
    let io_err = |e: std::io::Error| PipelineError::Io(e.to_string());
    let mut context = stream_from_tokens(vec![Token2D::new(CLS, PAD)]);
    loop {
        let candidates = next_step_candidates(model, feats, &context, k, n_eval_points, seed)?;
        writeln!(output, "step {}:", context.step_count() + 1).map_err(io_err)?;
        for (i, c) in candidates.iter().enumerate() {
            writeln!(output, "  [{}] {}", i + 1, describe(c)).map_err(io_err)?;
        }
        writeln!(output, "  [q] quit and save the partial design").map_err(io_err)?;
        let choice = loop {
            write!(output, "choose> ").map_err(io_err)?;
            output.flush().map_err(io_err)?;
            let mut line = String::new();
            if input.read_line(&mut line).map_err(io_err)? == 0 {
                // End of scripted input quits with the partial design.
                return Ok((context, false));
            }
            let line = line.trim();
            if line.eq_ignore_ascii_case("q") || line.eq_ignore_ascii_case("quit") {
                return Ok((context, false));
            }
            match line.parse::<usize>() {
                Ok(n) if n >= 1 && n <= candidates.len() => break n - 1,
                _ => {
                    writeln!(
                        output,
                        "invalid selection {line:?}; enter 1..{} or q",
                        candidates.len()
                    )
                    .map_err(io_err)?;
                }
            }
        };
        let chosen = &candidates[choice];
        if chosen.ends_design && chosen.step_tokens.is_empty() {
            let mut tokens = context.tokens.clone();
            tokens.push(Token2D::new(END, PAD));
            return Ok((stream_from_tokens(tokens), true));
        }
        let mut tokens = context.tokens.clone();
        tokens.extend(chosen.step_tokens.iter().copied());
        if chosen.ends_design {
            tokens.push(Token2D::new(END, PAD));
            return Ok((stream_from_tokens(tokens), true));
        }
        let next_context = stream_from_tokens(tokens);
        if chosen.program.is_none() {
            // An unparsable proposal cannot seed further steps.
            writeln!(
                output,
                "chosen step is not grammatical; saving the partial design"
            )
            .map_err(io_err)?;
            return Ok((next_context, false));
        }
        context = next_context;
        if context.true_len() + 2 >= crate::lang::MAX_TOKENS {
            writeln!(output, "token capacity reached; stopping").map_err(io_err)?;
            return Ok((context, false));
        }
    }
}

fn describe(c: &StepCandidate) -> String {
    let cd = if c.preview_cd.is_finite() {
        format!("{:.3}", c.preview_cd * 1e3)
    } else {
        "inf".to_string()
    };
    if c.ends_design && c.step_tokens.is_empty() {
        return format!("finish design (preview CD x1e3 {cd})");
    }
    match c.program.as_ref().and_then(|p| p.steps.last()) {
        Some(step) => {
            let e = &step.extrusion;
            format!(
                "{:?} plane tau ({:.2}, {:.2}, {:.2}) angles ({:.0}, {:.0}, {:.0})deg d+ {:.2} sigma {:.2} | {} curves | preview CD x1e3 {cd}",
                e.boolean_op,
                e.tau[0],
                e.tau[1],
                e.tau[2],
                e.euler[0].to_degrees(),
                e.euler[1].to_degrees(),
                e.euler[2].to_degrees(),
                e.d_plus,
                e.sigma,
                step.sketch.curve_count(),
            )
        }
        None => format!("unparsable step proposal (preview CD x1e3 {cd})"),
    }
}

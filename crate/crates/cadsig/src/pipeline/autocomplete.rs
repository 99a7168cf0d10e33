//! Conditional auto-completion and step-wise candidate generation.

use rayon::prelude::*;

use crate::geom::{evaluate_program, normalize_to_unit_box};
use crate::lang::{
    stream_from_tokens, stream_to_program, CadProgram, StreamTracker, Token2D, TokenStream, CLS,
    END, MAX_TOKENS, PAD, VOCAB,
};
use crate::metrics::chamfer;
use crate::net::{DecodeState, Model};
use crate::tensor::{Array, Scalar};

use super::decode::{argmax_f64, decode, DecodeResult, Sampling};
use super::PipelineError;

/// Auto-completion outcome, including the completion-over-input CD ratio.
#[derive(Debug, Clone)]
pub struct AutocompleteResult {
    pub decode: DecodeResult,
    /// CD between the completed reconstruction and the target cloud.
    pub cd_pred_gt: f64,
    /// CD between the given-prefix-only reconstruction and the target.
    pub cd_in_gt: f64,
    /// `cd_pred_gt / cd_in_gt`; absent when the prefix fails to
    /// reconstruct or scores zero.
    pub ratio: Option<f64>,
}

/// Complete a design history whose first step is given.
///
/// `given` must be a syntactically complete first step (`cls` plus one
/// extrusion-sketch pair). The input cloud is the ground-truth model's
/// cloud; CD of the completed and prefix-only reconstructions are both
/// measured against it.
pub fn autocomplete<T: Scalar>(
    model: &Model<T>,
    points: &Array<f64>,
    given: &TokenStream,
    sampling: Sampling,
    n_eval_points: usize,
    seed: u64,
) -> Result<AutocompleteResult, PipelineError> {
    validate_step_boundary(given)?;
    let result = decode(model, points, given, sampling, n_eval_points, seed)?;

    let coords: Vec<[f64; 3]> = (0..points.rows)
        .map(|i| [points.get(i, 0), points.get(i, 1), points.get(i, 2)])
        .collect();

    // Prefix-only reconstruction: the given step closed by an end token.
    let mut prefix_tokens = given.tokens.clone();
    prefix_tokens.push(Token2D::new(END, PAD));
    let prefix_stream = stream_from_tokens(prefix_tokens);
    let cd_in_gt =
        reconstruction_cd(&prefix_stream, &coords, n_eval_points, seed).unwrap_or(f64::INFINITY);

    let cd_pred_gt = result.selected_candidate().cd_to_input;
    let ratio = if cd_in_gt.is_finite() && cd_in_gt > 0.0 && cd_pred_gt.is_finite() {
        Some(cd_pred_gt / cd_in_gt)
    } else {
        None
    };
    Ok(AutocompleteResult {
        decode: result,
        cd_pred_gt,
        cd_in_gt,
        ratio,
    })
}

fn validate_step_boundary(stream: &TokenStream) -> Result<(), PipelineError> {
    if stream.true_len() == 0 || stream.token_at(0) != Token2D::new(CLS, PAD) {
        return Err(PipelineError::Input(
            "prefix must start with (cls, pad)".to_string(),
        ));
    }
    let mut tracker = StreamTracker::new();
    for pos in 0..stream.true_len() {
        tracker.feed(stream.token_at(pos));
    }
    if tracker.is_derailed() || !tracker.at_step_boundary() {
        return Err(PipelineError::Input(
            "prefix must end at a design-step boundary".to_string(),
        ));
    }
    Ok(())
}

fn reconstruction_cd(
    stream: &TokenStream,
    coords: &[[f64; 3]],
    n_eval_points: usize,
    seed: u64,
) -> Option<f64> {
    let program = stream_to_program(stream).ok()?;
    let sample = evaluate_program(&program, n_eval_points, seed);
    if !sample.valid {
        return None;
    }
    let pred = normalize_to_unit_box(&sample.positions()).ok()?;
    let inp = normalize_to_unit_box(coords).ok()?;
    chamfer(&pred, &inp).ok()
}

/// A proposed next design step with a preview reconstruction.
#[derive(Debug, Clone)]
pub struct StepCandidate {
    /// Tokens of the proposed step (empty when the proposal is to stop).
    pub step_tokens: Vec<Token2D>,
    /// Context plus the proposed step.
    pub stream: TokenStream,
    /// Preview program (context + step, terminated).
    pub program: Option<CadProgram>,
    /// True when this proposal ends the design instead of adding a step.
    pub ends_design: bool,
    /// CD of the preview reconstruction against the input cloud.
    pub preview_cd: f64,
}

/// Branch on the top-k alternatives for the next step's first extrusion
/// token and decode one full step per branch.
pub fn next_step_candidates<T: Scalar>(
    model: &Model<T>,
    points: &Array<f64>,
    context: &TokenStream,
    k: usize,
    n_eval_points: usize,
    seed: u64,
) -> Result<Vec<StepCandidate>, PipelineError> {
    validate_step_boundary(context)?;
    let k = k.max(1);
    let mut state = DecodeState::new(model, points);
    let mut logits = (vec![0.0; VOCAB], vec![0.0; VOCAB]);
    for pos in 0..context.true_len() {
        logits = state.feed(context.token_at(pos));
    }
    let mut order: Vec<usize> = (0..VOCAB).collect();
    order.sort_by(|&a, &b| {
        logits.0[b]
            .partial_cmp(&logits.0[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let b_pick = argmax_f64(&logits.1) as u16;
    let branch_tokens: Vec<Token2D> = order
        .into_iter()
        .take(k)
        .map(|a| Token2D::new(a as u16, b_pick))
        .collect();

    let coords: Vec<[f64; 3]> = (0..points.rows)
        .map(|i| [points.get(i, 0), points.get(i, 1), points.get(i, 2)])
        .collect();
    let candidates: Vec<StepCandidate> = branch_tokens
        .par_iter()
        .map(|tok| {
            let mut branch = state.clone();
            let mut step_tokens = Vec::new();
            let mut ends_design = tok.a == END;
            let mut logits = branch.feed(*tok);
            if !ends_design {
                step_tokens.push(*tok);
                // One full step: run until the tracker returns to a step
                // boundary (the sketch's e_s consumed) or the stream ends.
                while branch.position() < MAX_TOKENS - 1
                    && !branch.tracker().at_step_boundary()
                    && !branch.tracker().is_done()
                    && !branch.tracker().is_derailed()
                {
                    let next =
                        Token2D::new(argmax_f64(&logits.0) as u16, argmax_f64(&logits.1) as u16);
                    if next.a == END {
                        // Mid-step stop proposal: leave the step partial.
                        break;
                    }
                    logits = branch.feed(next);
                    step_tokens.push(next);
                }
            }
            if branch.tracker().is_done() {
                ends_design = true;
            }
            // Preview: context + step, closed with an end token.
            let mut preview_tokens = context.tokens.clone();
            preview_tokens.extend(step_tokens.iter().copied());
            if !branch.tracker().is_done() {
                preview_tokens.push(Token2D::new(END, PAD));
            }
            let preview = stream_from_tokens(preview_tokens);
            let preview_cd =
                reconstruction_cd(&preview, &coords, n_eval_points, seed).unwrap_or(f64::INFINITY);
            let program = stream_to_program(&preview).ok();
            StepCandidate {
                step_tokens,
                stream: preview,
                program,
                ends_design,
                preview_cd,
            }
        })
        .collect();
    Ok(candidates)
}

//! Auto-regressive decoding with hybrid sampling and Chamfer-based
//! candidate selection.

use rayon::prelude::*;

use crate::geom::{evaluate_program, normalize_to_unit_box};
use crate::lang::{
    stream_to_program, CadProgram, Token2D, TokenStream, CLS, MAX_TOKENS, PAD, VOCAB,
};
use crate::metrics::chamfer;
use crate::net::{DecodeState, Model};
use crate::tensor::{Array, Scalar};

use super::PipelineError;

/// Token-selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Greedy throughout.
    Top1,
    /// Branch on the top-k first generated tokens, greedy afterwards.
    Hybrid(usize),
}

/// One decoded candidate sequence with its reconstruction score.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub stream: TokenStream,
    pub program: Option<CadProgram>,
    pub valid: bool,
    /// Diagnosis when the parse or reconstruction failed.
    pub diag: String,
    /// Chamfer distance of the reconstruction to the input cloud
    /// (infinity when invalid).
    pub cd_to_input: f64,
}

/// Hybrid-sampling outcome: candidates in branch-rank order plus the
/// selected index (minimum CD among valid candidates; falls back to the
/// rank-1 stream when everything is invalid).
#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub candidates: Vec<Candidate>,
    pub selected: usize,
    pub all_invalid: bool,
}

impl DecodeResult {
    pub fn selected_candidate(&self) -> &Candidate {
        &self.candidates[self.selected]
    }
}

/// Decode continuations of `prefix` for the cloud in `points`.
///
/// `points` carries the network features (`N x (3 + f)`, normals included);
/// the first three columns are the coordinates used for instance extraction
/// and CD scoring. The prefix must open with `(cls, pad)`.
pub fn decode<T: Scalar>(
    model: &Model<T>,
    points: &Array<f64>,
    prefix: &TokenStream,
    sampling: Sampling,
    n_eval_points: usize,
    seed: u64,
) -> Result<DecodeResult, PipelineError> {
    if prefix.true_len() == 0 || prefix.token_at(0) != Token2D::new(CLS, PAD) {
        return Err(PipelineError::Input(
            "decode prefix must start with the (cls, pad) token".to_string(),
        ));
    }
    let k = match sampling {
        Sampling::Top1 => 1,
        Sampling::Hybrid(k) => k.max(1),
    };

    // Feed the shared prefix once.
    let mut state = DecodeState::new(model, points);
    let mut last_logits = (vec![0.0; VOCAB], vec![0.0; VOCAB]);
    for pos in 0..prefix.true_len() {
        last_logits = state.feed(prefix.token_at(pos));
    }

    // Branch tokens: top-k of the a-component distribution; the b component
    // follows its own greedy head.
    let branch_a = top_k(&last_logits.0, k);
    let b_pick = argmax_f64(&last_logits.1) as u16;
    let branch_tokens: Vec<Token2D> = branch_a
        .into_iter()
        .map(|a| Token2D::new(a as u16, b_pick))
        .collect();

    let coords: Vec<[f64; 3]> = (0..points.rows)
        .map(|i| [points.get(i, 0), points.get(i, 1), points.get(i, 2)])
        .collect();
    let candidates: Vec<Candidate> = branch_tokens
        .par_iter()
        .map(|tok| {
            let mut branch = state.clone();
            let stream = continue_greedy(&mut branch, *tok);
            score_candidate(stream, &coords, n_eval_points, seed)
        })
        .collect();

    let mut selected = 0usize;
    let mut best = f64::INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        if c.valid && c.cd_to_input < best {
            best = c.cd_to_input;
            selected = i;
        }
    }
    let all_invalid = !candidates.iter().any(|c| c.valid);
    Ok(DecodeResult {
        candidates,
        selected: if all_invalid { 0 } else { selected },
        all_invalid,
    })
}

/// Feed `first`, then greedy tokens until the end class or capacity.
fn continue_greedy<T: Scalar>(state: &mut DecodeState<'_, T>, first: Token2D) -> TokenStream {
    let mut logits = state.feed(first);
    // The branched token may itself be the end class (cls and end share it).
    let mut last = first;
    while last.a != CLS && state.position() < MAX_TOKENS {
        last = Token2D::new(argmax_f64(&logits.0) as u16, argmax_f64(&logits.1) as u16);
        logits = state.feed(last);
    }
    state.stream()
}

fn score_candidate(
    stream: TokenStream,
    coords: &[[f64; 3]],
    n_eval_points: usize,
    seed: u64,
) -> Candidate {
    match stream_to_program(&stream) {
        Ok(program) => {
            let sample = evaluate_program(&program, n_eval_points, seed);
            if sample.valid {
                let cd = normalize_to_unit_box(&sample.positions())
                    .ok()
                    .and_then(|pred| {
                        normalize_to_unit_box(coords)
                            .ok()
                            .and_then(|inp| chamfer(&pred, &inp).ok())
                    });
                match cd {
                    Some(cd) => Candidate {
                        stream,
                        program: Some(program),
                        valid: true,
                        diag: String::new(),
                        cd_to_input: cd,
                    },
                    None => Candidate {
                        stream,
                        program: Some(program),
                        valid: false,
                        diag: "degenerate reconstruction cloud".to_string(),
                        cd_to_input: f64::INFINITY,
                    },
                }
            } else {
                Candidate {
                    stream,
                    program: Some(program),
                    valid: false,
                    diag: sample.diag,
                    cd_to_input: f64::INFINITY,
                }
            }
        }
        Err(e) => Candidate {
            stream,
            program: None,
            valid: false,
            diag: e.to_string(),
            cd_to_input: f64::INFINITY,
        },
    }
}

pub(crate) fn argmax_f64(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

fn top_k(logits: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..logits.len()).collect();
    idx.sort_by(|&a, &b| {
        logits[b]
            .partial_cmp(&logits[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// Points-plus-normals feature matrix from a dataset-style cloud.
pub fn feature_matrix(points: &[[f64; 3]], normals: &[[f64; 3]]) -> Array<f64> {
    assert_eq!(points.len(), normals.len());
    let mut m = Array::zeros(points.len(), 6);
    for i in 0..points.len() {
        for k in 0..3 {
            m.set(i, k, points[i][k]);
            m.set(i, 3 + k, normals[i][k]);
        }
    }
    m
}

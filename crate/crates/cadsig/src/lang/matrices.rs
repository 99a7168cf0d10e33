//! Dense matrix encoding of a token stream for the network input.

use super::{TokenStream, MAX_TOKENS, VOCAB};

/// One-hot token matrix plus flag/step columns and the padding mask, all
/// padded to the maximum sequence length.
#[derive(Debug, Clone)]
pub struct StreamMatrices {
    /// Row-major `MAX_TOKENS x 2*VOCAB` one-hot matrix: row i holds ones at
    /// `a_i` and `VOCAB + b_i`. Rows at or beyond `true_len` are all zero.
    pub c: Vec<f64>,
    /// Token flags as a value column, `MAX_TOKENS` entries.
    pub c_type: Vec<f64>,
    /// Step indices as a value column, `MAX_TOKENS` entries.
    pub c_step: Vec<f64>,
    /// True at padded positions (`pos >= true_len`).
    pub pad_mask: Vec<bool>,
    pub true_len: usize,
}

/// Encode a stream into its padded matrix form.
///
/// Padded rows of the one-hot matrix are zeroed rather than carrying an
/// additive negative-infinity mask; downstream attention and the loss apply
/// their own padding masks.
pub fn encode_matrices(stream: &TokenStream) -> StreamMatrices {
    let width = 2 * VOCAB;
    let mut c = vec![0.0; MAX_TOKENS * width];
    let mut c_type = vec![0.0; MAX_TOKENS];
    let mut c_step = vec![0.0; MAX_TOKENS];
    let mut pad_mask = vec![true; MAX_TOKENS];
    let n = stream.true_len().min(MAX_TOKENS);
    for i in 0..n {
        let t = stream.token_at(i);
        c[i * width + t.a as usize] = 1.0;
        c[i * width + VOCAB + t.b as usize] = 1.0;
        c_type[i] = f64::from(stream.flag_at(i));
        c_step[i] = f64::from(stream.step_at(i));
        pad_mask[i] = false;
    }
    // Pad rows keep the pad token's flag so the value column is total.
    for i in n..MAX_TOKENS {
        c_type[i] = f64::from(super::FLAG_PAD);
    }
    StreamMatrices {
        c,
        c_type,
        c_step,
        pad_mask,
        true_len: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{stream_from_tokens, Token2D, CLS, PAD};

    #[test]
    fn cls_row_has_expected_one_hots() {
        let stream = stream_from_tokens(vec![Token2D::new(CLS, PAD)]);
        let m = encode_matrices(&stream);
        let width = 2 * VOCAB;
        assert_eq!(m.c[CLS as usize], 1.0);
        assert_eq!(m.c[VOCAB + PAD as usize], 1.0);
        let row_sum: f64 = m.c[..width].iter().sum();
        assert_eq!(row_sum, 2.0);
    }

    #[test]
    fn row_sums_and_pad_mask() {
        let prog = crate::lang::fixtures::single_step_program();
        let stream = crate::lang::program_to_stream(&prog).unwrap();
        let m = encode_matrices(&stream);
        let width = 2 * VOCAB;
        for i in 0..MAX_TOKENS {
            let row_sum: f64 = m.c[i * width..(i + 1) * width].iter().sum();
            if i < stream.true_len() {
                assert_eq!(row_sum, 2.0, "row {i}");
                assert!(!m.pad_mask[i]);
            } else {
                assert_eq!(row_sum, 0.0, "row {i}");
                assert!(m.pad_mask[i]);
            }
        }
        let pad_count = m.pad_mask.iter().filter(|p| **p).count();
        assert_eq!(pad_count, MAX_TOKENS - stream.true_len());
    }
}

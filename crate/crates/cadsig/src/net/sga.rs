//! Sketch-instance guided attention masking.

use std::sync::Arc;

use crate::geom::SketchInstance;
use crate::lang::{StreamTracker, TokenStream};
use crate::tensor::{Array, Scalar, NEG_LARGE};

/// Per-row routing for cross-attention.
#[derive(Debug, Clone, PartialEq)]
pub enum SgaRow {
    /// Extrusion/structural rows and any fallback: zero mask, plain keys.
    Plain,
    /// Sketch-token row restricted to its step's instance points.
    Instance(Arc<Vec<usize>>),
}

impl SgaRow {
    pub fn is_instance(&self) -> bool {
        matches!(self, SgaRow::Instance(_))
    }
}

/// Row classification plus the dense additive mask.
#[derive(Debug, Clone)]
pub struct SgaMask {
    pub rows: Vec<SgaRow>,
    pub n_points: usize,
}

impl SgaMask {
    /// Dense `rows x n_points` additive mask: sketch-instance rows carry
    /// `NEG_LARGE` outside their instance, every other entry is zero.
    pub fn dense<T: Scalar>(&self) -> Array<T> {
        let mut m = Array::zeros(self.rows.len(), self.n_points);
        let blocked = T::from_f64(NEG_LARGE);
        for (i, row) in self.rows.iter().enumerate() {
            if let SgaRow::Instance(idx) = row {
                let r = m.row_mut(i);
                for v in r.iter_mut() {
                    *v = blocked;
                }
                for &j in idx.iter() {
                    r[j] = T::ZERO;
                }
            }
        }
        m
    }

    /// True where the row uses the masked (instance) attention path.
    pub fn instance_rows(&self) -> Vec<bool> {
        self.rows.iter().map(SgaRow::is_instance).collect()
    }
}

/// Classify each stream position and attach its step's instance.
///
/// `instances[l]` is the sketch instance of step `l + 1`; sketch rows of
/// steps with empty instances (and rows of derailed streams) fall back to
/// the plain path. `seq_len` rows are produced, padding past the stream's
/// true length.
pub fn build_sga_mask(
    stream: &TokenStream,
    instances: &[SketchInstance],
    n_points: usize,
    seq_len: usize,
) -> SgaMask {
    let shared: Vec<Arc<Vec<usize>>> = instances
        .iter()
        .map(|inst| Arc::new(inst.indices.clone()))
        .collect();
    let mut tracker = StreamTracker::new();
    let mut rows = Vec::with_capacity(seq_len);
    for pos in 0..seq_len {
        if pos >= stream.true_len() {
            rows.push(SgaRow::Plain);
            continue;
        }
        let info = tracker.feed(stream.token_at(pos));
        if info.is_sketch && info.step >= 1 {
            let li = (info.step - 1) as usize;
            match shared.get(li) {
                Some(idx) if !idx.is_empty() => rows.push(SgaRow::Instance(Arc::clone(idx))),
                _ => rows.push(SgaRow::Plain),
            }
        } else {
            rows.push(SgaRow::Plain);
        }
    }
    SgaMask { rows, n_points }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::extract_sketch_instance;
    use crate::lang::{program_to_stream, stream_from_tokens, Token2D, CLS, PAD};

    #[test]
    fn no_sketch_tokens_all_plain() {
        let stream = stream_from_tokens(vec![Token2D::new(CLS, PAD), Token2D::new(42, PAD)]);
        let mask = build_sga_mask(&stream, &[], 8, 4);
        assert!(mask.rows.iter().all(|r| !r.is_instance()));
        let dense: Array<f64> = mask.dense();
        assert!(dense.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sketch_rows_mask_outside_points() {
        let prog = crate::lang::fixtures::single_step_program();
        let stream = program_to_stream(&prog).unwrap();
        let points = vec![
            [0.5, 0.5, 0.02],  // inside instance
            [5.0, 5.0, 5.0],   // far outside
            [0.25, 0.75, 0.0], // inside
        ];
        let inst = extract_sketch_instance(&points, &prog.steps[0].extrusion);
        assert_eq!(inst.indices, vec![0, 2]);
        let mask = build_sga_mask(&stream, &[inst], points.len(), stream.true_len());
        // Rows 1..=11 are the extrusion block: plain. Sketch rows follow.
        assert!(!mask.rows[1].is_instance());
        assert!(mask.rows[12].is_instance());
        let dense: Array<f64> = mask.dense();
        assert_eq!(dense.get(12, 0), 0.0);
        assert!(dense.get(12, 1) <= NEG_LARGE);
        assert_eq!(dense.get(12, 2), 0.0);
        // cls row and extrusion rows stay zero.
        for j in 0..3 {
            assert_eq!(dense.get(0, j), 0.0);
            assert_eq!(dense.get(5, j), 0.0);
        }
    }

    #[test]
    fn empty_instance_falls_back_to_plain() {
        let prog = crate::lang::fixtures::single_step_program();
        let stream = program_to_stream(&prog).unwrap();
        let far = vec![[9.0, 9.0, 9.0]];
        let inst = extract_sketch_instance(&far, &prog.steps[0].extrusion);
        assert!(inst.is_empty());
        let mask = build_sga_mask(&stream, &[inst], 1, stream.true_len());
        assert!(mask.rows.iter().all(|r| !r.is_instance()));
    }
}

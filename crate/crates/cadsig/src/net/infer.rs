//! Incremental no-gradient decoding.
//!
//! The point trunk (embedding, every block's aggregation, and the
//! cross-attention key/value projections) is computed once per cloud;
//! each generated token then costs one row of self-attention against
//! cached keys/values plus one row of cross-attention. Sketch instances
//! are re-extracted from the *predicted* extrusion tokens as each
//! extrusion block completes.

use std::sync::Arc;

use crate::geom::extract_sketch_instance;
use crate::lang::{
    try_dequantize, BooleanOp, ExtrusionOp, StreamTracker, Token2D, TokenStream, VOCAB,
};
use crate::tensor::{matmul, Array, Scalar};

use super::model::Model;

/// Incremental decoding state for one (model, cloud) pair.
#[derive(Clone)]
pub struct DecodeState<'m, T: Scalar> {
    model: &'m Model<T>,
    coords: Vec<[f64; 3]>,
    /// Per cross-attention block: plain and refined K/V over all points.
    k_plain: Vec<Option<Array<T>>>,
    v_plain: Vec<Option<Array<T>>>,
    k_ref: Vec<Option<Array<T>>>,
    v_ref: Vec<Option<Array<T>>>,
    /// Per block: cached token-side keys/values, one row per fed token.
    k_cache: Vec<Array<T>>,
    v_cache: Vec<Array<T>>,
    tracker: StreamTracker,
    tokens: Vec<Token2D>,
    flags: Vec<u8>,
    steps: Vec<u8>,
    /// Raw tokens of the extrusion block in progress.
    ext_window: Vec<Token2D>,
    /// Instance point indices per completed step (1-based step - 1).
    instances: Vec<Option<Arc<Vec<usize>>>>,
}

impl<'m, T: Scalar> DecodeState<'m, T> {
    /// Run the point trunk and prepare per-block caches.
    pub fn new(model: &'m Model<T>, points: &Array<f64>) -> Self {
        let cfg = &model.cfg;
        assert_eq!(points.cols, 3 + cfg.feat_dim, "point feature width");
        let coords: Vec<[f64; 3]> = (0..points.rows)
            .map(|i| [points.get(i, 0), points.get(i, 1), points.get(i, 2)])
            .collect();
        let knn = super::knn_indices(&coords, cfg.k_nn);

        let x: Array<T> = points.cast();
        let p0 = relu(&model.linear_raw("point_embed", &x));
        let fv0 = model.lfa_raw("lfa0", &p0, &knn, cfg.k_nn);
        let mut fv = model.lfa_raw("lfa1", &fv0, &knn, cfg.k_nn);

        let mut k_plain = Vec::with_capacity(cfg.blocks);
        let mut v_plain = Vec::with_capacity(cfg.blocks);
        let mut k_ref = Vec::with_capacity(cfg.blocks);
        let mut v_ref = Vec::with_capacity(cfg.blocks);
        for b in 0..cfg.blocks {
            fv = model.lfa_raw(&format!("blocks.{b}.lfa"), &fv, &knn, cfg.k_nn);
            if b >= cfg.ca_skip_blocks {
                k_plain.push(Some(model.linear_raw(&format!("blocks.{b}.ca.wk"), &fv)));
                v_plain.push(Some(model.linear_raw(&format!("blocks.{b}.ca.wv"), &fv)));
                let mut refined = fv.clone();
                for r in 0..4 {
                    refined = model.linear_raw(&format!("blocks.{b}.refine.{r}"), &refined);
                    if r < 3 {
                        refined = relu(&refined);
                    }
                }
                k_ref.push(Some(
                    model.linear_raw(&format!("blocks.{b}.ca.wk"), &refined),
                ));
                v_ref.push(Some(
                    model.linear_raw(&format!("blocks.{b}.ca.wv"), &refined),
                ));
            } else {
                k_plain.push(None);
                v_plain.push(None);
                k_ref.push(None);
                v_ref.push(None);
            }
        }

        let d = cfg.d_e;
        Self {
            model,
            coords,
            k_plain,
            v_plain,
            k_ref,
            v_ref,
            k_cache: (0..cfg.blocks).map(|_| Array::zeros(0, d)).collect(),
            v_cache: (0..cfg.blocks).map(|_| Array::zeros(0, d)).collect(),
            tracker: StreamTracker::new(),
            tokens: Vec::new(),
            flags: Vec::new(),
            steps: Vec::new(),
            ext_window: Vec::new(),
            instances: Vec::new(),
        }
    }

    pub fn position(&self) -> usize {
        self.tokens.len()
    }

    pub fn tracker(&self) -> &StreamTracker {
        &self.tracker
    }

    /// Stream fed so far.
    pub fn stream(&self) -> TokenStream {
        TokenStream {
            tokens: self.tokens.clone(),
            flags: self.flags.clone(),
            steps: self.steps.clone(),
        }
    }

    /// Instance indices extracted so far (one slot per completed step).
    pub fn instances(&self) -> &[Option<Arc<Vec<usize>>>] {
        &self.instances
    }

    /// Feed one token; returns next-token logits for both components.
    pub fn feed(&mut self, tok: Token2D) -> (Vec<f64>, Vec<f64>) {
        let cfg = &self.model.cfg;
        let pos = self.tokens.len();
        assert!(pos < cfg.n_ts(), "stream exceeds maximum length");
        let was_derailed = self.tracker.is_derailed();
        let info = self.tracker.feed(tok);
        self.tokens.push(tok);
        self.flags.push(info.flag);
        self.steps.push(info.step);

        // Track extrusion windows to extract instances from predictions.
        if !was_derailed && !self.tracker.is_derailed() {
            if (1..=9).contains(&info.flag) {
                if info.flag == 1 && self.ext_window.len() >= 10 {
                    self.ext_window.clear();
                }
                self.ext_window.push(tok);
            } else if info.flag == 10 {
                // e_e: the previous 10 tokens form the extrusion block.
                if self.ext_window.len() == 10 {
                    if let Some(ext) = extrusion_from_tokens(&self.ext_window) {
                        let inst = extract_sketch_instance(&self.coords, &ext);
                        let step_idx = (info.step as usize).saturating_sub(1);
                        while self.instances.len() <= step_idx {
                            self.instances.push(None);
                        }
                        self.instances[step_idx] = Some(Arc::new(inst.indices));
                    }
                }
                self.ext_window.clear();
            }
        }

        // Embed the row.
        let model = self.model;
        let w_tok = model.param("token_embed.w");
        let b_tok = model.param("token_embed.b");
        let pos_enc = model.param("token_embed.pos");
        let d = cfg.d_e;
        let mut row = Array::<T>::zeros(1, d);
        for j in 0..d {
            let mut acc = w_tok.get(tok.a as usize, j)
                + w_tok.get(VOCAB + tok.b as usize, j)
                + w_tok.get(2 * VOCAB, j) * T::from_f64(f64::from(info.flag))
                + w_tok.get(2 * VOCAB + 1, j) * T::from_f64(f64::from(info.step));
            acc += b_tok.get(0, j) + pos_enc.get(pos, j);
            row.set(0, j, acc);
        }
        let mut fc = row;

        let heads = cfg.heads;
        let dh = cfg.head_dim();
        let scale = T::from_f64(1.0 / (dh as f64).sqrt());
        // The row attends through its step's instance only when one exists.
        let instance: Option<Arc<Vec<usize>>> = if info.is_sketch && info.step >= 1 {
            self.instances
                .get((info.step - 1) as usize)
                .and_then(|o| o.clone())
                .filter(|idx| !idx.is_empty())
        } else {
            None
        };

        for b in 0..cfg.blocks {
            // Self-attention against cached keys/values.
            let q = model.linear_raw(&format!("blocks.{b}.sa.wq"), &fc);
            let k_new = model.linear_raw(&format!("blocks.{b}.sa.wk"), &fc);
            let v_new = model.linear_raw(&format!("blocks.{b}.sa.wv"), &fc);
            append_row(&mut self.k_cache[b], &k_new);
            append_row(&mut self.v_cache[b], &v_new);
            let kc = &self.k_cache[b];
            let vc = &self.v_cache[b];
            let t_len = kc.rows;
            let mut merged = Array::<T>::zeros(1, d);
            for h in 0..heads {
                let off = h * dh;
                let mut scores = Vec::with_capacity(t_len);
                for r in 0..t_len {
                    let mut acc = T::ZERO;
                    for j in 0..dh {
                        acc += q.get(0, off + j) * kc.get(r, off + j);
                    }
                    scores.push(acc * scale);
                }
                softmax_inplace(&mut scores);
                for (r, w) in scores.iter().enumerate() {
                    for j in 0..dh {
                        let cur = merged.get(0, off + j);
                        merged.set(0, off + j, cur + *w * vc.get(r, off + j));
                    }
                }
            }
            let sa = model.linear_raw(&format!("blocks.{b}.sa.wo"), &merged);
            fc = add_norm_row(model, &format!("blocks.{b}.sa_norm"), &sa, &fc);

            if b >= cfg.ca_skip_blocks {
                let (kv_k, kv_v, subset): (&Array<T>, &Array<T>, Option<&[usize]>) = match &instance
                {
                    Some(idx) => (
                        self.k_ref[b].as_ref().unwrap(),
                        self.v_ref[b].as_ref().unwrap(),
                        Some(idx.as_slice()),
                    ),
                    None => (
                        self.k_plain[b].as_ref().unwrap(),
                        self.v_plain[b].as_ref().unwrap(),
                        None,
                    ),
                };
                let qc = model.linear_raw(&format!("blocks.{b}.ca.wq"), &fc);
                let mut merged = Array::<T>::zeros(1, d);
                for h in 0..heads {
                    let off = h * dh;
                    let row_indices: Box<dyn Iterator<Item = usize>> = match subset {
                        Some(s) => Box::new(s.iter().copied()),
                        None => Box::new(0..kv_k.rows),
                    };
                    let rows: Vec<usize> = row_indices.collect();
                    let mut scores = Vec::with_capacity(rows.len());
                    for &r in &rows {
                        let mut acc = T::ZERO;
                        for j in 0..dh {
                            acc += qc.get(0, off + j) * kv_k.get(r, off + j);
                        }
                        scores.push(acc * scale);
                    }
                    softmax_inplace(&mut scores);
                    for (w, &r) in scores.iter().zip(&rows) {
                        for j in 0..dh {
                            let cur = merged.get(0, off + j);
                            merged.set(0, off + j, cur + *w * kv_v.get(r, off + j));
                        }
                    }
                }
                let ca = model.linear_raw(&format!("blocks.{b}.ca.wo"), &merged);
                fc = add_norm_row(model, &format!("blocks.{b}.ca_norm"), &ca, &fc);
            }

            let h1 = relu(&model.linear_raw(&format!("blocks.{b}.ffn.l1"), &fc));
            let h2 = model.linear_raw(&format!("blocks.{b}.ffn.l2"), &h1);
            fc = if cfg.post_norm_ffn {
                add_norm_row(model, &format!("blocks.{b}.ffn_norm"), &h2, &fc)
            } else {
                add_rows(&fc, &h2)
            };
        }

        let lx = model.linear_raw("head_x", &fc);
        let ly = model.linear_raw("head_y", &fc);
        (
            lx.data.iter().map(|v| v.to_f64()).collect(),
            ly.data.iter().map(|v| v.to_f64()).collect(),
        )
    }
}

impl<T: Scalar> Model<T> {
    pub(crate) fn param(&self, name: &str) -> &Array<T> {
        &self.params[self.idx(name)]
    }

    /// `x . W + b` outside any graph.
    pub(crate) fn linear_raw(&self, name: &str, x: &Array<T>) -> Array<T> {
        let w = self.param(&format!("{name}.w"));
        let b = self.param(&format!("{name}.b"));
        let mut y = matmul(x, w, false, false);
        for i in 0..y.rows {
            for (o, &bv) in y.row_mut(i).iter_mut().zip(b.row(0)) {
                *o += bv;
            }
        }
        y
    }

    /// Local feature aggregation outside any graph.
    pub(crate) fn lfa_raw(
        &self,
        name: &str,
        feats: &Array<T>,
        knn: &[usize],
        k: usize,
    ) -> Array<T> {
        let n = feats.rows;
        let d = feats.cols;
        let mut gathered = Array::<T>::zeros(n * k, d);
        for (i, &src) in knn.iter().enumerate() {
            gathered.row_mut(i).copy_from_slice(feats.row(src));
        }
        let scores = self.linear_raw(&format!("{name}.score"), &gathered);
        let mut pooled = Array::<T>::zeros(n, d);
        for g in 0..n {
            let base = g * k;
            for j in 0..d {
                let mut mx = scores.get(base, j);
                for r in 1..k {
                    mx = mx.maximum(scores.get(base + r, j));
                }
                let mut denom = T::ZERO;
                let mut acc = T::ZERO;
                for r in 0..k {
                    let e = (scores.get(base + r, j) - mx).exp();
                    denom += e;
                    acc += e * gathered.get(base + r, j);
                }
                pooled.set(g, j, acc / denom);
            }
        }
        relu(&self.linear_raw(&format!("{name}.out"), &pooled))
    }
}

fn relu<T: Scalar>(x: &Array<T>) -> Array<T> {
    x.map(|v| v.maximum(T::ZERO))
}

fn add_rows<T: Scalar>(a: &Array<T>, b: &Array<T>) -> Array<T> {
    debug_assert_eq!(a.shape(), b.shape());
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| x + y).collect();
    Array::from_vec(a.rows, a.cols, data)
}

fn add_norm_row<T: Scalar>(
    model: &Model<T>,
    name: &str,
    new: &Array<T>,
    residual: &Array<T>,
) -> Array<T> {
    let gamma = model.param(&format!("{name}.gamma"));
    let beta = model.param(&format!("{name}.beta"));
    let summed = add_rows(new, residual);
    let eps = T::from_f64(1e-5);
    let n = summed.cols;
    let inv_n = T::from_f64(1.0 / n as f64);
    let mut out = Array::<T>::zeros(summed.rows, n);
    for i in 0..summed.rows {
        let mut mean = T::ZERO;
        for &v in summed.row(i) {
            mean += v;
        }
        mean = mean * inv_n;
        let mut var = T::ZERO;
        for &v in summed.row(i) {
            let dlt = v - mean;
            var += dlt * dlt;
        }
        var = var * inv_n;
        let rstd = T::ONE / (var + eps).sqrt();
        for j in 0..n {
            let y = (summed.get(i, j) - mean) * rstd;
            out.set(i, j, y * gamma.get(0, j) + beta.get(0, j));
        }
    }
    out
}

fn softmax_inplace<T: Scalar>(scores: &mut [T]) {
    let mut mx = scores[0];
    for &s in scores.iter() {
        mx = mx.maximum(s);
    }
    let mut denom = T::ZERO;
    for s in scores.iter_mut() {
        *s = (*s - mx).exp();
        denom += *s;
    }
    for s in scores.iter_mut() {
        *s = *s / denom;
    }
}

fn append_row<T: Scalar>(cache: &mut Array<T>, row: &Array<T>) {
    debug_assert_eq!(row.rows, 1);
    debug_assert_eq!(cache.cols, row.cols);
    cache.data.extend_from_slice(row.row(0));
    cache.rows += 1;
}

/// Rebuild an extrusion op from its ten pre-`e_e` tokens.
fn extrusion_from_tokens(window: &[Token2D]) -> Option<ExtrusionOp> {
    if window.len() != 10 {
        return None;
    }
    let mut vals = [0.0f64; 9];
    for (i, v) in vals.iter_mut().enumerate() {
        *v = try_dequantize(window[i].a).ok()?;
    }
    let boolean_op = BooleanOp::from_token_value(window[9].a)?;
    let tau_c = std::f64::consts::TAU;
    Some(ExtrusionOp {
        d_plus: vals[0],
        d_minus: vals[1],
        tau: [vals[2], vals[3], vals[4]],
        euler: [vals[5] * tau_c, vals[6] * tau_c, vals[7] * tau_c],
        sigma: vals[8],
        boolean_op,
    })
}

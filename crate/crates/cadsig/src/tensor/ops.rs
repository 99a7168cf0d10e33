//! Differentiable op set. Shape violations panic with both shapes named.

use std::sync::Arc;

use rand::Rng;

use super::graph::{BackArgs, Graph, Var};
use super::{matmul, Array, Scalar};

impl<T: Scalar> Graph<T> {
    /// Matrix product with optional transposes.
    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Var {
        let value = matmul(self.value(a), self.value(b), ta, tb);
        self.push_op(
            value,
            vec![a.0, b.0],
            Box::new(move |args: &BackArgs<'_, T>| {
                let (a, b, g) = (args.parents[0], args.parents[1], args.grad);
                let (da, db) = match (ta, tb) {
                    (false, false) => (matmul(g, b, false, true), matmul(a, g, true, false)),
                    (false, true) => (matmul(g, b, false, false), matmul(g, a, true, false)),
                    (true, false) => (matmul(b, g, false, true), matmul(a, g, false, false)),
                    (true, true) => (matmul(b, g, true, true), matmul(g, a, true, true)),
                };
                vec![Some(da), Some(db)]
            }),
        )
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, b, false, false)
    }

    /// Elementwise add; `b` may be a `1 x cols` row vector broadcast over
    /// the rows of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (ar, ac) = self.value(a).shape();
        let (br, bc) = self.value(b).shape();
        let broadcast = br == 1 && ar != 1;
        assert!(
            (ar == br && ac == bc) || (broadcast && ac == bc),
            "add shape mismatch: ({ar}, {ac}) vs ({br}, {bc})"
        );
        let mut value = self.value(a).clone();
        let bv = self.value(b);
        for i in 0..ar {
            let brow = bv.row(if broadcast { 0 } else { i });
            for (o, &x) in value.row_mut(i).iter_mut().zip(brow) {
                *o += x;
            }
        }
        self.push_op(
            value,
            vec![a.0, b.0],
            Box::new(move |args: &BackArgs<'_, T>| {
                let g = args.grad;
                let db = if broadcast {
                    let mut acc = Array::zeros(1, g.cols);
                    for i in 0..g.rows {
                        for (o, &x) in acc.row_mut(0).iter_mut().zip(g.row(i)) {
                            *o += x;
                        }
                    }
                    acc
                } else {
                    g.clone()
                };
                vec![Some(g.clone()), Some(db)]
            }),
        )
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Var {
        let av = self.value(a);
        let bv = self.value(b);
        assert_eq!(
            av.shape(),
            bv.shape(),
            "mul_elem shape mismatch: {:?} vs {:?}",
            av.shape(),
            bv.shape()
        );
        let data = av.data.iter().zip(&bv.data).map(|(&x, &y)| x * y).collect();
        let value = Array::from_vec(av.rows, av.cols, data);
        self.push_op(
            value,
            vec![a.0, b.0],
            Box::new(|args: &BackArgs<'_, T>| {
                let (a, b, g) = (args.parents[0], args.parents[1], args.grad);
                let da = Array::from_vec(
                    g.rows,
                    g.cols,
                    g.data.iter().zip(&b.data).map(|(&g, &y)| g * y).collect(),
                );
                let db = Array::from_vec(
                    g.rows,
                    g.cols,
                    g.data.iter().zip(&a.data).map(|(&g, &x)| g * x).collect(),
                );
                vec![Some(da), Some(db)]
            }),
        )
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let s = T::from_f64(c);
        let value = self.value(a).map(|v| v * s);
        self.push_op(
            value,
            vec![a.0],
            Box::new(move |args: &BackArgs<'_, T>| vec![Some(args.grad.map(|g| g * s))]),
        )
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.maximum(T::ZERO));
        self.push_op(
            value,
            vec![a.0],
            Box::new(|args: &BackArgs<'_, T>| {
                let x = args.parents[0];
                let data = args
                    .grad
                    .data
                    .iter()
                    .zip(&x.data)
                    .map(|(&g, &v)| if v > T::ZERO { g } else { T::ZERO })
                    .collect();
                vec![Some(Array::from_vec(x.rows, x.cols, data))]
            }),
        )
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let mut acc = T::ZERO;
        for &v in &self.value(a).data {
            acc += v;
        }
        let value = Array::from_vec(1, 1, vec![acc]);
        self.push_op(
            value,
            vec![a.0],
            Box::new(|args: &BackArgs<'_, T>| {
                let g = args.grad.data[0];
                let x = args.parents[0];
                vec![Some(Array::from_vec(
                    x.rows,
                    x.cols,
                    vec![g; x.rows * x.cols],
                ))]
            }),
        )
    }

    /// Row-wise layer normalization with learned scale and shift
    /// (`gamma`, `beta` are `1 x cols`).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let eps = T::from_f64(1e-5);
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        assert_eq!(
            self.value(gamma).shape(),
            (1, cols),
            "layer_norm gamma shape {:?} vs (1, {cols})",
            self.value(gamma).shape()
        );
        assert_eq!(
            self.value(beta).shape(),
            (1, cols),
            "layer_norm beta shape {:?} vs (1, {cols})",
            self.value(beta).shape()
        );
        let gv = self.value(gamma).clone();
        let bv = self.value(beta).clone();
        let mut value = Array::zeros(rows, cols);
        for i in 0..rows {
            let (mean, rstd) = row_moments(xv.row(i), eps);
            for j in 0..cols {
                let y = (xv.get(i, j) - mean) * rstd;
                value.set(i, j, y * gv.data[j] + bv.data[j]);
            }
        }
        self.push_op(
            value,
            vec![x.0, gamma.0, beta.0],
            Box::new(move |args: &BackArgs<'_, T>| {
                let x = args.parents[0];
                let gamma = args.parents[1];
                let g = args.grad;
                let (rows, cols) = x.shape();
                let eps = T::from_f64(1e-5);
                let inv_n = T::from_f64(1.0 / cols as f64);
                let mut dx = Array::zeros(rows, cols);
                let mut dgamma = Array::zeros(1, cols);
                let mut dbeta = Array::zeros(1, cols);
                for i in 0..rows {
                    let (mean, rstd) = row_moments(x.row(i), eps);
                    let mut mean_gd = T::ZERO;
                    let mut mean_gdy = T::ZERO;
                    let mut ys = Vec::with_capacity(cols);
                    for j in 0..cols {
                        let y = (x.get(i, j) - mean) * rstd;
                        let gd = gamma.data[j] * g.get(i, j);
                        mean_gd += gd;
                        mean_gdy += gd * y;
                        ys.push((y, gd));
                        dgamma.data[j] += g.get(i, j) * y;
                        dbeta.data[j] += g.get(i, j);
                    }
                    mean_gd = mean_gd * inv_n;
                    mean_gdy = mean_gdy * inv_n;
                    for (j, (y, gd)) in ys.into_iter().enumerate() {
                        dx.set(i, j, (gd - mean_gd - y * mean_gdy) * rstd);
                    }
                }
                vec![Some(dx), Some(dgamma), Some(dbeta)]
            }),
        )
    }

    /// Row-wise softmax of `x + mask`; the mask is a constant additive
    /// array (entries `0` or a large negative number).
    pub fn softmax_masked(&mut self, x: Var, mask: Option<Arc<Array<T>>>) -> Var {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        if let Some(m) = &mask {
            assert_eq!(
                m.shape(),
                (rows, cols),
                "softmax mask shape {:?} vs {:?}",
                m.shape(),
                (rows, cols)
            );
        }
        let mut value = Array::zeros(rows, cols);
        for i in 0..rows {
            let mut mx = T::from_f64(f64::NEG_INFINITY);
            for j in 0..cols {
                let v = xv.get(i, j) + mask.as_ref().map_or(T::ZERO, |m| m.get(i, j));
                if v > mx {
                    mx = v;
                }
            }
            let mut denom = T::ZERO;
            for j in 0..cols {
                let v = xv.get(i, j) + mask.as_ref().map_or(T::ZERO, |m| m.get(i, j));
                let e = (v - mx).exp();
                value.set(i, j, e);
                denom += e;
            }
            for j in 0..cols {
                value.set(i, j, value.get(i, j) / denom);
            }
        }
        self.push_op(
            value,
            vec![x.0],
            Box::new(|args: &BackArgs<'_, T>| {
                let p = args.output;
                let g = args.grad;
                let (rows, cols) = p.shape();
                let mut dx = Array::zeros(rows, cols);
                for i in 0..rows {
                    let mut dot = T::ZERO;
                    for j in 0..cols {
                        dot += g.get(i, j) * p.get(i, j);
                    }
                    for j in 0..cols {
                        dx.set(i, j, p.get(i, j) * (g.get(i, j) - dot));
                    }
                }
                vec![Some(dx)]
            }),
        )
    }

    /// Inverted dropout; identity when the graph is not in training mode.
    pub fn dropout(&mut self, x: Var, p: f64) -> Var {
        if !self.training || p <= 0.0 {
            return x;
        }
        assert!(p < 1.0, "dropout probability {p} must be below 1");
        let keep_scale = T::from_f64(1.0 / (1.0 - p));
        let (rows, cols) = self.value(x).shape();
        let mask: Arc<Vec<T>> = Arc::new(
            (0..rows * cols)
                .map(|_| {
                    if self.rng.random::<f64>() < p {
                        T::ZERO
                    } else {
                        keep_scale
                    }
                })
                .collect(),
        );
        let data = self
            .value(x)
            .data
            .iter()
            .zip(mask.iter())
            .map(|(&v, &m)| v * m)
            .collect();
        let value = Array::from_vec(rows, cols, data);
        let mask_b = Arc::clone(&mask);
        self.push_op(
            value,
            vec![x.0],
            Box::new(move |args: &BackArgs<'_, T>| {
                let data = args
                    .grad
                    .data
                    .iter()
                    .zip(mask_b.iter())
                    .map(|(&g, &m)| g * m)
                    .collect();
                vec![Some(Array::from_vec(args.grad.rows, args.grad.cols, data))]
            }),
        )
    }

    /// Column-wise concatenation.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let rows = self.value(parts[0]).rows;
        let widths: Vec<usize> = parts
            .iter()
            .map(|&v| {
                assert_eq!(
                    self.value(v).rows,
                    rows,
                    "concat_cols row mismatch: {:?} vs {rows} rows",
                    self.value(v).shape()
                );
                self.value(v).cols
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut value = Array::zeros(rows, total);
        for i in 0..rows {
            let mut at = 0;
            for &p in parts {
                let pv = self.value(p);
                value.row_mut(i)[at..at + pv.cols].copy_from_slice(pv.row(i));
                at += pv.cols;
            }
        }
        let widths_b = widths.clone();
        self.push_op(
            value,
            parts.iter().map(|v| v.0).collect(),
            Box::new(move |args: &BackArgs<'_, T>| {
                let g = args.grad;
                let mut out = Vec::with_capacity(widths_b.len());
                let mut at = 0;
                for &w in &widths_b {
                    let mut part = Array::zeros(g.rows, w);
                    for i in 0..g.rows {
                        part.row_mut(i).copy_from_slice(&g.row(i)[at..at + w]);
                    }
                    out.push(Some(part));
                    at += w;
                }
                out
            }),
        )
    }

    /// Copy of a column window.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        assert!(
            start + len <= cols,
            "slice_cols [{start}, {}) out of {:?}",
            start + len,
            xv.shape()
        );
        let mut value = Array::zeros(rows, len);
        for i in 0..rows {
            value
                .row_mut(i)
                .copy_from_slice(&xv.row(i)[start..start + len]);
        }
        self.push_op(
            value,
            vec![x.0],
            Box::new(move |args: &BackArgs<'_, T>| {
                let g = args.grad;
                let x = args.parents[0];
                let mut dx = Array::zeros(x.rows, x.cols);
                for i in 0..g.rows {
                    dx.row_mut(i)[start..start + len].copy_from_slice(g.row(i));
                }
                vec![Some(dx)]
            }),
        )
    }

    /// Row gather: `out[i] = x[idx[i]]`.
    pub fn gather_rows(&mut self, x: Var, idx: Arc<Vec<usize>>) -> Var {
        let xv = self.value(x);
        let cols = xv.cols;
        let mut value = Array::zeros(idx.len(), cols);
        for (i, &r) in idx.iter().enumerate() {
            value.row_mut(i).copy_from_slice(xv.row(r));
        }
        let idx_b = Arc::clone(&idx);
        self.push_op(
            value,
            vec![x.0],
            Box::new(move |args: &BackArgs<'_, T>| {
                let g = args.grad;
                let x = args.parents[0];
                let mut dx = Array::zeros(x.rows, x.cols);
                for (i, &r) in idx_b.iter().enumerate() {
                    for (o, &gv) in dx.row_mut(r).iter_mut().zip(g.row(i)) {
                        *o += gv;
                    }
                }
                vec![Some(dx)]
            }),
        )
    }

    /// Attentive pooling over fixed-size neighbor groups: rows come in
    /// consecutive groups of `k`; per group and per column, scores are
    /// softmax-normalized and used to average the feature rows.
    pub fn group_softmax_pool(&mut self, scores: Var, feats: Var, k: usize) -> Var {
        let sv = self.value(scores);
        let fv = self.value(feats);
        assert_eq!(
            sv.shape(),
            fv.shape(),
            "group_softmax_pool shape mismatch: {:?} vs {:?}",
            sv.shape(),
            fv.shape()
        );
        assert!(
            k > 0 && sv.rows % k == 0,
            "rows {} not divisible by k={k}",
            sv.rows
        );
        let n = sv.rows / k;
        let cols = sv.cols;
        let mut value = Array::zeros(n, cols);
        for gidx in 0..n {
            pool_group(sv, fv, gidx, k, |j, v| value.set(gidx, j, v), cols);
        }
        self.push_op(
            value,
            vec![scores.0, feats.0],
            Box::new(move |args: &BackArgs<'_, T>| {
                let s = args.parents[0];
                let f = args.parents[1];
                let out = args.output;
                let g = args.grad;
                let cols = s.cols;
                let mut ds = Array::zeros(s.rows, cols);
                let mut df = Array::zeros(f.rows, cols);
                for gi in 0..out.rows {
                    let base = gi * k;
                    for j in 0..cols {
                        // Recompute the per-column softmax weights.
                        let mut mx = s.get(base, j);
                        for r in 1..k {
                            mx = mx.maximum(s.get(base + r, j));
                        }
                        let mut denom = T::ZERO;
                        let mut ws = [T::ZERO; 16];
                        assert!(k <= 16, "group size above 16 unsupported");
                        for r in 0..k {
                            let e = (s.get(base + r, j) - mx).exp();
                            ws[r] = e;
                            denom += e;
                        }
                        let go = g.get(gi, j);
                        let ov = out.get(gi, j);
                        for r in 0..k {
                            let w = ws[r] / denom;
                            df.set(base + r, j, w * go);
                            ds.set(base + r, j, w * (f.get(base + r, j) - ov) * go);
                        }
                    }
                }
                vec![Some(ds), Some(df)]
            }),
        )
    }

    /// Row blend: `out[i] = if take_a[i] { a[i] } else { b[i] }`.
    pub fn select_rows(&mut self, a: Var, b: Var, take_a: Arc<Vec<bool>>) -> Var {
        let av = self.value(a);
        let bv = self.value(b);
        assert_eq!(
            av.shape(),
            bv.shape(),
            "select_rows shape mismatch: {:?} vs {:?}",
            av.shape(),
            bv.shape()
        );
        assert_eq!(take_a.len(), av.rows, "select_rows mask length");
        let mut value = Array::zeros(av.rows, av.cols);
        for i in 0..av.rows {
            value
                .row_mut(i)
                .copy_from_slice(if take_a[i] { av.row(i) } else { bv.row(i) });
        }
        let mask = Arc::clone(&take_a);
        self.push_op(
            value,
            vec![a.0, b.0],
            Box::new(move |args: &BackArgs<'_, T>| {
                let g = args.grad;
                let mut da = Array::zeros(g.rows, g.cols);
                let mut db = Array::zeros(g.rows, g.cols);
                for i in 0..g.rows {
                    if mask[i] {
                        da.row_mut(i).copy_from_slice(g.row(i));
                    } else {
                        db.row_mut(i).copy_from_slice(g.row(i));
                    }
                }
                vec![Some(da), Some(db)]
            }),
        )
    }

    /// Weighted row mixture out of one weight matrix: row `i` of the output
    /// is `sum_j weight_ij * w[row_ij]`. This is the embedding projection
    /// of one-hot concatenations without materializing the one-hots.
    pub fn rows_weighted(&mut self, w: Var, terms: Arc<Vec<Vec<(usize, f64)>>>) -> Var {
        let wv = self.value(w);
        let cols = wv.cols;
        let mut value = Array::zeros(terms.len(), cols);
        for (i, row_terms) in terms.iter().enumerate() {
            for &(r, wt) in row_terms {
                let wt = T::from_f64(wt);
                for (o, &x) in value.row_mut(i).iter_mut().zip(wv.row(r)) {
                    *o += wt * x;
                }
            }
        }
        let terms_b = Arc::clone(&terms);
        self.push_op(
            value,
            vec![w.0],
            Box::new(move |args: &BackArgs<'_, T>| {
                let g = args.grad;
                let w = args.parents[0];
                let mut dw = Array::zeros(w.rows, w.cols);
                for (i, row_terms) in terms_b.iter().enumerate() {
                    for &(r, wt) in row_terms {
                        let wt = T::from_f64(wt);
                        for (o, &gv) in dw.row_mut(r).iter_mut().zip(g.row(i)) {
                            *o += wt * gv;
                        }
                    }
                }
                vec![Some(dw)]
            }),
        )
    }

    /// Mean cross-entropy from logits over the rows where `active` is true.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        targets: Arc<Vec<usize>>,
        active: Arc<Vec<bool>>,
    ) -> Var {
        let lv = self.value(logits);
        let (rows, cols) = lv.shape();
        assert_eq!(targets.len(), rows, "cross_entropy targets length");
        assert_eq!(active.len(), rows, "cross_entropy active length");
        let n_active = active.iter().filter(|a| **a).count().max(1);
        let mut acc = 0.0f64;
        for i in 0..rows {
            if !active[i] {
                continue;
            }
            let t = targets[i];
            assert!(t < cols, "target {t} out of {cols} classes");
            let row = lv.row(i);
            let mut mx = row[0];
            for &v in row {
                mx = mx.maximum(v);
            }
            let mut denom = T::ZERO;
            for &v in row {
                denom += (v - mx).exp();
            }
            acc += denom.ln().to_f64() + mx.to_f64() - row[t].to_f64();
        }
        let value = Array::scalar(acc / n_active as f64);
        let targets_b = Arc::clone(&targets);
        let active_b = Arc::clone(&active);
        self.push_op(
            value,
            vec![logits.0],
            Box::new(move |args: &BackArgs<'_, T>| {
                let l = args.parents[0];
                let gscale = args.grad.data[0] * T::from_f64(1.0 / n_active as f64);
                let (rows, cols) = l.shape();
                let mut dl = Array::zeros(rows, cols);
                for i in 0..rows {
                    if !active_b[i] {
                        continue;
                    }
                    let row = l.row(i);
                    let mut mx = row[0];
                    for &v in row {
                        mx = mx.maximum(v);
                    }
                    let mut denom = T::ZERO;
                    for &v in row {
                        denom += (v - mx).exp();
                    }
                    for j in 0..cols {
                        let p = (row[j] - mx).exp() / denom;
                        let y = if j == targets_b[i] { T::ONE } else { T::ZERO };
                        dl.set(i, j, (p - y) * gscale);
                    }
                }
                vec![Some(dl)]
            }),
        )
    }
}

fn row_moments<T: Scalar>(row: &[T], eps: T) -> (T, T) {
    let inv_n = T::from_f64(1.0 / row.len() as f64);
    let mut mean = T::ZERO;
    for &v in row {
        mean += v;
    }
    mean = mean * inv_n;
    let mut var = T::ZERO;
    for &v in row {
        let d = v - mean;
        var += d * d;
    }
    var = var * inv_n;
    (mean, T::ONE / (var + eps).sqrt())
}

fn pool_group<T: Scalar>(
    s: &Array<T>,
    f: &Array<T>,
    gidx: usize,
    k: usize,
    mut sink: impl FnMut(usize, T),
    cols: usize,
) {
    let base = gidx * k;
    for j in 0..cols {
        let mut mx = s.get(base, j);
        for r in 1..k {
            mx = mx.maximum(s.get(base + r, j));
        }
        let mut denom = T::ZERO;
        let mut acc = T::ZERO;
        for r in 0..k {
            let e = (s.get(base + r, j) - mx).exp();
            denom += e;
            acc += e * f.get(base + r, j);
        }
        sink(j, acc / denom);
    }
}

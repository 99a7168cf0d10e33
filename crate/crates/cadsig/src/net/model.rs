//! Parameter store, initialization, and the recorded (differentiable)
//! forward pass.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::lang::{TokenStream, FLAG_PAD, VOCAB};
use crate::tensor::{Array, Graph, Scalar, Var, NEG_LARGE};

use super::sga::SgaMask;
use super::ModelConfig;

/// Named parameters plus the architecture config.
pub struct Model<T: Scalar> {
    pub cfg: ModelConfig,
    pub names: Vec<String>,
    pub params: Vec<Array<T>>,
    index: HashMap<String, usize>,
}

/// Parameter vars bound into one graph.
pub struct BoundModel {
    vars: Vec<Var>,
}

impl BoundModel {
    pub fn var(&self, model_index: usize) -> Var {
        self.vars[model_index]
    }
}

pub struct ForwardOutput {
    pub logits_x: Var,
    pub logits_y: Var,
}

/// Everything one forward pass needs besides parameters.
pub struct ForwardInput<'a> {
    /// `N x (3 + f)` point features (coordinates first).
    pub points: &'a Array<f64>,
    /// Flattened `N x k` neighbor indices.
    pub knn: Arc<Vec<usize>>,
    pub stream: &'a TokenStream,
    /// Rows to process (crop or pad the stream to this many rows).
    pub seq_len: usize,
    pub sga: &'a SgaMask,
}

impl<T: Scalar> Model<T> {
    /// Initialize parameters from the config seed.
    pub fn init(cfg: &ModelConfig) -> Self {
        cfg.validate().expect("invalid model config");
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        let mut names = Vec::new();
        let mut params = Vec::new();
        let mut linear = |names: &mut Vec<String>,
                          params: &mut Vec<Array<T>>,
                          name: &str,
                          d_in: usize,
                          d_out: usize| {
            let bound = (6.0 / (d_in + d_out) as f64).sqrt();
            let w = Array::from_fn(d_in, d_out, |_, _| {
                (rng.random::<f64>() * 2.0 - 1.0) * bound
            });
            names.push(format!("{name}.w"));
            params.push(w);
            names.push(format!("{name}.b"));
            params.push(Array::zeros(1, d_out));
        };
        let norm = |names: &mut Vec<String>, params: &mut Vec<Array<T>>, name: &str, d: usize| {
            names.push(format!("{name}.gamma"));
            params.push(Array::from_fn(1, d, |_, _| 1.0));
            names.push(format!("{name}.beta"));
            params.push(Array::zeros(1, d));
        };

        let d = cfg.d_e;
        let in_dim = 3 + cfg.feat_dim;
        linear(&mut names, &mut params, "point_embed", in_dim, cfg.d_e_p0);
        linear(
            &mut names,
            &mut params,
            "lfa0.score",
            cfg.d_e_p0,
            cfg.d_e_p0,
        );
        linear(&mut names, &mut params, "lfa0.out", cfg.d_e_p0, d);
        linear(&mut names, &mut params, "lfa1.score", d, d);
        linear(&mut names, &mut params, "lfa1.out", d, d);

        linear(&mut names, &mut params, "token_embed", 2 * VOCAB + 2, d);
        names.push("token_embed.pos".to_string());
        let mut pos_rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ 0x905e);
        params.push(Array::from_fn(cfg.n_ts(), d, |_, _| {
            (pos_rng.random::<f64>() * 2.0 - 1.0) * 0.02
        }));

        for b in 0..cfg.blocks {
            for proj in ["wq", "wk", "wv", "wo"] {
                linear(
                    &mut names,
                    &mut params,
                    &format!("blocks.{b}.sa.{proj}"),
                    d,
                    d,
                );
            }
            norm(&mut names, &mut params, &format!("blocks.{b}.sa_norm"), d);
            linear(
                &mut names,
                &mut params,
                &format!("blocks.{b}.lfa.score"),
                d,
                d,
            );
            linear(
                &mut names,
                &mut params,
                &format!("blocks.{b}.lfa.out"),
                d,
                d,
            );
            if b >= cfg.ca_skip_blocks {
                for proj in ["wq", "wk", "wv", "wo"] {
                    linear(
                        &mut names,
                        &mut params,
                        &format!("blocks.{b}.ca.{proj}"),
                        d,
                        d,
                    );
                }
                norm(&mut names, &mut params, &format!("blocks.{b}.ca_norm"), d);
                for r in 0..4 {
                    linear(
                        &mut names,
                        &mut params,
                        &format!("blocks.{b}.refine.{r}"),
                        d,
                        d,
                    );
                }
            }
            linear(
                &mut names,
                &mut params,
                &format!("blocks.{b}.ffn.l1"),
                d,
                cfg.d_ff,
            );
            linear(
                &mut names,
                &mut params,
                &format!("blocks.{b}.ffn.l2"),
                cfg.d_ff,
                d,
            );
            if cfg.post_norm_ffn {
                norm(&mut names, &mut params, &format!("blocks.{b}.ffn_norm"), d);
            }
        }
        linear(&mut names, &mut params, "head_x", d, VOCAB);
        linear(&mut names, &mut params, "head_y", d, VOCAB);

        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Self {
            cfg: cfg.clone(),
            names,
            params,
            index,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    pub fn idx(&self, name: &str) -> usize {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    /// Bind every parameter into `g` as a leaf (gradient target when the
    /// graph records gradients).
    pub fn bind(&self, g: &mut Graph<T>) -> BoundModel {
        let vars = self
            .params
            .iter()
            .map(|p| g.input(p.clone(), true))
            .collect();
        BoundModel { vars }
    }

    /// Extract per-parameter gradients (zeros where unused) after backward.
    pub fn grads_from(&self, bound: &BoundModel, grads: &[Option<Array<T>>]) -> Vec<Array<T>> {
        self.params
            .iter()
            .zip(&bound.vars)
            .map(|(p, v)| {
                grads[v.0]
                    .clone()
                    .unwrap_or_else(|| Array::zeros(p.rows, p.cols))
            })
            .collect()
    }

    fn lin(&self, g: &mut Graph<T>, bound: &BoundModel, name: &str, x: Var) -> Var {
        let w = bound.var(self.idx(&format!("{name}.w")));
        let b = bound.var(self.idx(&format!("{name}.b")));
        let y = g.matmul(x, w);
        g.add(y, b)
    }

    fn add_norm(
        &self,
        g: &mut Graph<T>,
        bound: &BoundModel,
        name: &str,
        new: Var,
        residual: Var,
    ) -> Var {
        let gamma = bound.var(self.idx(&format!("{name}.gamma")));
        let beta = bound.var(self.idx(&format!("{name}.beta")));
        let summed = g.add(new, residual);
        g.layer_norm(summed, gamma, beta)
    }

    fn lfa(
        &self,
        g: &mut Graph<T>,
        bound: &BoundModel,
        name: &str,
        feats: Var,
        knn: &Arc<Vec<usize>>,
        k: usize,
    ) -> Var {
        let gathered = g.gather_rows(feats, Arc::clone(knn));
        let scores = self.lin(g, bound, &format!("{name}.score"), gathered);
        let pooled = g.group_softmax_pool(scores, gathered, k);
        let out = self.lin(g, bound, &format!("{name}.out"), pooled);
        g.relu(out)
    }

    /// Multi-head attention. `kv_sel` optionally provides a second K/V
    /// source and a row mask choosing it over the primary source.
    #[allow(clippy::too_many_arguments)]
    fn attention(
        &self,
        g: &mut Graph<T>,
        bound: &BoundModel,
        name: &str,
        q_in: Var,
        kv_in: Var,
        mask: Option<&Arc<Array<T>>>,
        alt: Option<(Var, &Arc<Array<T>>, &Arc<Vec<bool>>)>,
        dropout: f64,
    ) -> Var {
        let h = self.cfg.heads;
        let dh = self.cfg.head_dim();
        let q = self.lin(g, bound, &format!("{name}.wq"), q_in);
        let key = self.lin(g, bound, &format!("{name}.wk"), kv_in);
        let val = self.lin(g, bound, &format!("{name}.wv"), kv_in);
        let alt_kv = alt.map(|(alt_in, alt_mask, rows)| {
            let k2 = self.lin(g, bound, &format!("{name}.wk"), alt_in);
            let v2 = self.lin(g, bound, &format!("{name}.wv"), alt_in);
            (k2, v2, alt_mask, rows)
        });
        let scale = 1.0 / (dh as f64).sqrt();
        let mut heads = Vec::with_capacity(h);
        for hi in 0..h {
            let qh = g.slice_cols(q, hi * dh, dh);
            let kh = g.slice_cols(key, hi * dh, dh);
            let vh = g.slice_cols(val, hi * dh, dh);
            let scores = g.matmul_t(qh, kh, false, true);
            let scaled = g.scale(scores, scale);
            let weights = g.softmax_masked(scaled, mask.cloned());
            let mut out = g.matmul(weights, vh);
            if let Some((k2, v2, alt_mask, rows)) = &alt_kv {
                let k2h = g.slice_cols(*k2, hi * dh, dh);
                let v2h = g.slice_cols(*v2, hi * dh, dh);
                let scores2 = g.matmul_t(qh, k2h, false, true);
                let scaled2 = g.scale(scores2, scale);
                let weights2 = g.softmax_masked(scaled2, Some(Arc::clone(alt_mask)));
                let out2 = g.matmul(weights2, v2h);
                out = g.select_rows(out2, out, Arc::clone(rows));
            }
            heads.push(out);
        }
        let merged = g.concat_cols(&heads);
        let projected = self.lin(g, bound, &format!("{name}.wo"), merged);
        g.dropout(projected, dropout)
    }

    /// Token embedding row recipe: one-hot rows of both components plus the
    /// flag/step value columns, zeroed past the stream's true length.
    pub(crate) fn token_terms(
        &self,
        stream: &TokenStream,
        seq_len: usize,
    ) -> Vec<Vec<(usize, f64)>> {
        let mut terms = Vec::with_capacity(seq_len);
        for pos in 0..seq_len {
            if pos >= stream.true_len() {
                if self.cfg.additive_input_mask {
                    // Literal variant: the one-hot block reads negative
                    // infinity; realized as NEG_LARGE on every one-hot
                    // column.
                    let mut row: Vec<(usize, f64)> =
                        (0..2 * VOCAB).map(|c| (c, NEG_LARGE)).collect();
                    row.push((2 * VOCAB, f64::from(FLAG_PAD)));
                    row.push((2 * VOCAB + 1, 0.0));
                    terms.push(row);
                } else {
                    // Zeroed one-hot rows; flag/step value columns stay.
                    terms.push(vec![(2 * VOCAB, f64::from(FLAG_PAD)), (2 * VOCAB + 1, 0.0)]);
                }
                continue;
            }
            let t = stream.token_at(pos);
            terms.push(vec![
                (t.a as usize, 1.0),
                (VOCAB + t.b as usize, 1.0),
                (2 * VOCAB, f64::from(stream.flag_at(pos))),
                (2 * VOCAB + 1, f64::from(stream.step_at(pos))),
            ]);
        }
        terms
    }

    /// Full recorded forward pass over `seq_len` token rows.
    pub fn forward(
        &self,
        g: &mut Graph<T>,
        bound: &BoundModel,
        input: &ForwardInput<'_>,
    ) -> ForwardOutput {
        let cfg = &self.cfg;
        let n = input.points.rows;
        let seq_len = input.seq_len;
        assert_eq!(
            input.points.cols,
            3 + cfg.feat_dim,
            "point features {:?} vs (_, {})",
            input.points.shape(),
            3 + cfg.feat_dim
        );
        assert_eq!(input.sga.rows.len(), seq_len, "SGA rows vs seq_len");
        assert_eq!(input.sga.n_points, n, "SGA n_points vs cloud");

        // Point embedding trunk.
        let x = g.input(input.points.cast::<T>(), false);
        let p0 = self.lin(g, bound, "point_embed", x);
        let p0 = g.relu(p0);
        let fv0 = self.lfa(g, bound, "lfa0", p0, &input.knn, cfg.k_nn);
        let mut fv = self.lfa(g, bound, "lfa1", fv0, &input.knn, cfg.k_nn);

        // Token embedding.
        let terms = Arc::new(self.token_terms(input.stream, seq_len));
        let w_tok = bound.var(self.idx("token_embed.w"));
        let emb = g.rows_weighted(w_tok, terms);
        let b_tok = bound.var(self.idx("token_embed.b"));
        let emb = g.add(emb, b_tok);
        let pos_rows: Arc<Vec<usize>> = Arc::new((0..seq_len).collect());
        let pos_all = bound.var(self.idx("token_embed.pos"));
        let pos = g.gather_rows(pos_all, pos_rows);
        let mut fc = g.add(emb, pos);
        fc = g.dropout(fc, cfg.dropout);

        // Causal mask with key-padding of rows past the true length.
        let true_len = input.stream.true_len().min(seq_len);
        let causal: Arc<Array<T>> = Arc::new(Array::from_fn(seq_len, seq_len, |i, j| {
            if j <= i && j < true_len.max(1) {
                0.0
            } else {
                NEG_LARGE
            }
        }));
        // SGA mask and row routing, shared across blocks.
        let sga_dense: Arc<Array<T>> = Arc::new(input.sga.dense());
        let sga_rows: Arc<Vec<bool>> = Arc::new(input.sga.instance_rows());
        let use_sga = sga_rows.iter().any(|r| *r);

        for b in 0..cfg.blocks {
            let sa = self.attention(
                g,
                bound,
                &format!("blocks.{b}.sa"),
                fc,
                fc,
                Some(&causal),
                None,
                cfg.dropout,
            );
            fc = self.add_norm(g, bound, &format!("blocks.{b}.sa_norm"), sa, fc);

            fv = self.lfa(
                g,
                bound,
                &format!("blocks.{b}.lfa"),
                fv,
                &input.knn,
                cfg.k_nn,
            );

            if b >= cfg.ca_skip_blocks {
                let alt = if use_sga {
                    let mut refined = fv;
                    for r in 0..4 {
                        refined = self.lin(g, bound, &format!("blocks.{b}.refine.{r}"), refined);
                        if r < 3 {
                            refined = g.relu(refined);
                        }
                    }
                    Some((refined, &sga_dense, &sga_rows))
                } else {
                    None
                };
                let ca = self.attention(
                    g,
                    bound,
                    &format!("blocks.{b}.ca"),
                    fc,
                    fv,
                    None,
                    alt,
                    cfg.dropout,
                );
                fc = self.add_norm(g, bound, &format!("blocks.{b}.ca_norm"), ca, fc);
            }

            let h1 = self.lin(g, bound, &format!("blocks.{b}.ffn.l1"), fc);
            let h1 = g.relu(h1);
            let h1 = g.dropout(h1, cfg.dropout);
            let h2 = self.lin(g, bound, &format!("blocks.{b}.ffn.l2"), h1);
            fc = if cfg.post_norm_ffn {
                self.add_norm(g, bound, &format!("blocks.{b}.ffn_norm"), h2, fc)
            } else {
                g.add(fc, h2)
            };
        }

        let logits_x = self.lin(g, bound, "head_x", fc);
        let logits_y = self.lin(g, bound, "head_y", fc);
        ForwardOutput { logits_x, logits_y }
    }

    /// Persist to the checkpoint format.
    pub fn save(&self, path: &std::path::Path) -> Result<(), crate::tensor::TensorError> {
        let config = serde_json::to_value(&self.cfg).expect("config serializes");
        crate::tensor::save_checkpoint(
            path,
            &config,
            &self.cfg.content_hash(),
            &self.names,
            &self.params,
        )
    }

    /// Load from the checkpoint format, validating shapes and names.
    pub fn load(path: &std::path::Path) -> Result<Self, crate::tensor::TensorError> {
        let (header, tensors) = crate::tensor::load_checkpoint::<T>(path)?;
        let cfg: ModelConfig = serde_json::from_value(header.config.clone())
            .map_err(|e| crate::tensor::TensorError::Checkpoint(format!("config decode: {e}")))?;
        let template = Model::<T>::init(&cfg);
        if header.tensors.len() != template.names.len() {
            return Err(crate::tensor::TensorError::Checkpoint(format!(
                "expected {} tensors, found {}",
                template.names.len(),
                header.tensors.len()
            )));
        }
        let mut by_name: HashMap<&str, usize> = HashMap::new();
        for (i, e) in header.tensors.iter().enumerate() {
            by_name.insert(e.name.as_str(), i);
        }
        let mut params = Vec::with_capacity(template.names.len());
        for (name, proto) in template.names.iter().zip(&template.params) {
            let &ti = by_name.get(name.as_str()).ok_or_else(|| {
                crate::tensor::TensorError::Checkpoint(format!("missing tensor {name}"))
            })?;
            let t = &tensors[ti];
            if t.shape() != proto.shape() {
                return Err(crate::tensor::TensorError::Checkpoint(format!(
                    "tensor {name}: shape {:?} does not match config {:?}",
                    t.shape(),
                    proto.shape()
                )));
            }
            params.push(t.clone());
        }
        Ok(Self {
            cfg,
            names: template.names,
            params,
            index: template.index,
        })
    }
}

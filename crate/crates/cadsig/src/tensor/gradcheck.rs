//! Central finite-difference gradient checking.
//!
//! Used by the per-op unit tests, the full-model check in the network
//! tests, and the acceptance suite. The builder runs on a fresh tape per
//! evaluation; the first tape's analytic gradients are compared against
//! symmetric differences of the loss.

use super::{Array, Graph, Var};

/// Maximum relative disagreement between analytic and central-difference
/// gradients of a scalar-valued graph over the given inputs.
///
/// The builder receives leaf vars in the order of `inputs` and returns the
/// scalar loss var.
pub fn max_rel_error<F>(build: F, inputs: &[Array<f64>], h: f64) -> f64
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Var,
{
    let eval = |arrays: &[Array<f64>]| -> f64 {
        let mut g = Graph::<f64>::eval_with_grad(0);
        let vars: Vec<Var> = arrays.iter().map(|a| g.input(a.clone(), true)).collect();
        let loss = build(&mut g, &vars);
        g.value(loss).item()
    };

    // Analytic pass.
    let mut g = Graph::<f64>::eval_with_grad(0);
    let vars: Vec<Var> = inputs.iter().map(|a| g.input(a.clone(), true)).collect();
    let loss = build(&mut g, &vars);
    let grads = g.backward(loss);

    let mut worst = 0.0f64;
    let mut work: Vec<Array<f64>> = inputs.to_vec();
    for (pi, input) in inputs.iter().enumerate() {
        let analytic = grads[vars[pi].0]
            .as_ref()
            .cloned()
            .unwrap_or_else(|| Array::zeros(input.rows, input.cols));
        for k in 0..input.data.len() {
            let orig = input.data[k];
            work[pi].data[k] = orig + h;
            let up = eval(&work);
            work[pi].data[k] = orig - h;
            let down = eval(&work);
            work[pi].data[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.data[k];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-2);
            if rel > worst {
                worst = rel;
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use std::sync::Arc;

    const H: f64 = 1e-5;
    const TOL: f64 = 1e-5;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn randn(r: &mut ChaCha12Rng, rows: usize, cols: usize) -> Array<f64> {
        Array::from_fn(rows, cols, |_, _| r.random::<f64>() * 2.0 - 1.0)
    }

    /// Project any output to a scalar with fixed pseudo-random weights so
    /// every output element influences the loss.
    fn to_scalar(g: &mut Graph<f64>, v: Var) -> Var {
        let (rows, cols) = g.value(v).shape();
        let w = Array::from_fn(rows, cols, |i, j| {
            ((i * 31 + j * 17) % 7) as f64 * 0.3 - 0.8
        });
        let wv = g.input(w, false);
        let prod = g.mul_elem(v, wv);
        g.sum_all(prod)
    }

    #[test]
    fn matmul_all_transpose_variants() {
        let mut r = rng(1);
        for (ta, tb) in [(false, false), (false, true), (true, false), (true, true)] {
            let a = if ta {
                randn(&mut r, 4, 3)
            } else {
                randn(&mut r, 3, 4)
            };
            let b = if tb {
                randn(&mut r, 5, 4)
            } else {
                randn(&mut r, 4, 5)
            };
            let err = max_rel_error(
                |g, vars| {
                    let c = g.matmul_t(vars[0], vars[1], ta, tb);
                    to_scalar(g, c)
                },
                &[a, b],
                H,
            );
            assert!(err < TOL, "matmul ta={ta} tb={tb}: {err}");
        }
    }

    #[test]
    fn add_with_and_without_broadcast() {
        let mut r = rng(2);
        let a = randn(&mut r, 4, 3);
        let b = randn(&mut r, 4, 3);
        let err = max_rel_error(
            |g, v| {
                let s = g.add(v[0], v[1]);
                to_scalar(g, s)
            },
            &[a.clone(), b],
            H,
        );
        assert!(err < TOL, "add: {err}");
        let bias = randn(&mut r, 1, 3);
        let err = max_rel_error(
            |g, v| {
                let s = g.add(v[0], v[1]);
                to_scalar(g, s)
            },
            &[a, bias],
            H,
        );
        assert!(err < TOL, "add broadcast: {err}");
    }

    #[test]
    fn relu_away_from_kink() {
        let mut r = rng(3);
        // Keep inputs away from zero so the finite difference is valid.
        let a = Array::from_fn(3, 4, |i, j| {
            let v = r.random::<f64>() - 0.5;
            let _ = (i, j);
            if v.abs() < 0.05 {
                v + 0.2
            } else {
                v
            }
        });
        let err = max_rel_error(
            |g, v| {
                let y = g.relu(v[0]);
                to_scalar(g, y)
            },
            &[a],
            H,
        );
        assert!(err < TOL, "relu: {err}");
    }

    #[test]
    fn layer_norm_full() {
        let mut r = rng(4);
        let x = randn(&mut r, 3, 6);
        let gamma = randn(&mut r, 1, 6);
        let beta = randn(&mut r, 1, 6);
        let err = max_rel_error(
            |g, v| {
                let y = g.layer_norm(v[0], v[1], v[2]);
                to_scalar(g, y)
            },
            &[x, gamma, beta],
            H,
        );
        assert!(err < TOL, "layer_norm: {err}");
    }

    #[test]
    fn softmax_with_additive_mask() {
        let mut r = rng(5);
        let x = randn(&mut r, 3, 5);
        let mut mask = Array::zeros(3, 5);
        mask.set(
            0,
            2,
            super::super::Scalar::from_f64(super::super::NEG_LARGE),
        );
        mask.set(
            2,
            0,
            super::super::Scalar::from_f64(super::super::NEG_LARGE),
        );
        let mask = Arc::new(mask);
        let err = max_rel_error(
            |g, v| {
                let y = g.softmax_masked(v[0], Some(Arc::clone(&mask)));
                to_scalar(g, y)
            },
            &[x],
            H,
        );
        assert!(err < TOL, "softmax_masked: {err}");
    }

    #[test]
    fn masked_key_gets_vanishing_weight() {
        let mut g = Graph::<f64>::inference();
        let x = g.input(Array::from_vec(1, 4, vec![0.3, -0.2, 0.9, 0.0]), false);
        let mut mask = Array::zeros(1, 4);
        mask.set(0, 1, super::super::NEG_LARGE);
        let p = g.softmax_masked(x, Some(Arc::new(mask)));
        assert!(g.value(p).get(0, 1) < 1e-12);
        let total: f64 = g.value(p).data.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_logits_give_uniform_probabilities_and_ln_v_loss() {
        let v = 267usize;
        let mut g = Graph::<f64>::inference();
        let x = g.input(Array::zeros(2, v), false);
        let p = g.softmax_masked(x, None);
        for &pv in &g.value(p).data {
            assert!((pv - 1.0 / v as f64).abs() < 1e-12);
        }
        let loss = g.cross_entropy(x, Arc::new(vec![5, 17]), Arc::new(vec![true, true]));
        assert!((g.value(loss).item() - (v as f64).ln()).abs() < 1e-12);
        assert!((g.value(loss).item() - 5.5872).abs() < 1e-3);
    }

    #[test]
    fn gather_concat_slice_select() {
        let mut r = rng(6);
        let x = randn(&mut r, 5, 4);
        let y = randn(&mut r, 5, 4);
        let idx = Arc::new(vec![0usize, 3, 3, 1, 4]);
        let mask = Arc::new(vec![true, false, true, false, true]);
        let err = max_rel_error(
            |g, v| {
                let gathered = g.gather_rows(v[0], Arc::clone(&idx));
                let sel = g.select_rows(gathered, v[1], Arc::clone(&mask));
                let cat = g.concat_cols(&[sel, v[1]]);
                let sl = g.slice_cols(cat, 2, 5);
                to_scalar(g, sl)
            },
            &[x, y],
            H,
        );
        assert!(err < TOL, "gather/select/concat/slice: {err}");
    }

    #[test]
    fn group_softmax_pool_grad() {
        let mut r = rng(7);
        let scores = randn(&mut r, 8, 3);
        let feats = randn(&mut r, 8, 3);
        let err = max_rel_error(
            |g, v| {
                let pooled = g.group_softmax_pool(v[0], v[1], 4);
                to_scalar(g, pooled)
            },
            &[scores, feats],
            H,
        );
        assert!(err < TOL, "group_softmax_pool: {err}");
    }

    #[test]
    fn rows_weighted_grad() {
        let mut r = rng(8);
        let w = randn(&mut r, 6, 4);
        let terms = Arc::new(vec![
            vec![(0usize, 1.0), (3, 2.0)],
            vec![(1, 1.0), (5, 0.5), (0, -1.0)],
            vec![],
        ]);
        let err = max_rel_error(
            |g, v| {
                let e = g.rows_weighted(v[0], Arc::clone(&terms));
                to_scalar(g, e)
            },
            &[w],
            H,
        );
        assert!(err < TOL, "rows_weighted: {err}");
    }

    #[test]
    fn cross_entropy_grad_and_masking() {
        let mut r = rng(9);
        let logits = randn(&mut r, 4, 7);
        let targets = Arc::new(vec![2usize, 0, 6, 3]);
        let active = Arc::new(vec![true, false, true, true]);
        let err = max_rel_error(
            |g, v| g.cross_entropy(v[0], Arc::clone(&targets), Arc::clone(&active)),
            &[logits.clone()],
            H,
        );
        assert!(err < TOL, "cross_entropy: {err}");

        // Inactive rows contribute nothing.
        let mut g = Graph::<f64>::eval_with_grad(0);
        let lv = g.input(logits, true);
        let loss = g.cross_entropy(lv, Arc::clone(&targets), Arc::clone(&active));
        let grads = g.backward(loss);
        let dl = grads[lv.0].as_ref().unwrap();
        for j in 0..7 {
            assert_eq!(dl.get(1, j), 0.0);
        }
    }

    #[test]
    fn dropout_scales_and_masks_consistently() {
        let mut g = Graph::<f64>::training(42);
        let x = g.input(Array::from_fn(64, 8, |_, _| 1.0), true);
        let y = g.dropout(x, 0.25);
        let keep: Vec<bool> = g.value(y).data.iter().map(|&v| v != 0.0).collect();
        let kept = keep.iter().filter(|k| **k).count();
        // Kept entries are scaled by 1/(1-p).
        for &v in g.value(y).data.iter().filter(|&&v| v != 0.0) {
            assert!((v - 1.0 / 0.75).abs() < 1e-12);
        }
        let frac = kept as f64 / keep.len() as f64;
        assert!((frac - 0.75).abs() < 0.05, "kept {frac}");
        // Backward routes through the same mask.
        let loss = g.sum_all(y);
        let grads = g.backward(loss);
        let dx = grads[x.0].as_ref().unwrap();
        for (gv, k) in dx.data.iter().zip(&keep) {
            if *k {
                assert!((gv - 1.0 / 0.75).abs() < 1e-12);
            } else {
                assert_eq!(*gv, 0.0);
            }
        }
        // Same seed reproduces the mask; eval mode is the identity.
        let mut g2 = Graph::<f64>::training(42);
        let x2 = g2.input(Array::from_fn(64, 8, |_, _| 1.0), false);
        let y2 = g2.dropout(x2, 0.25);
        assert_eq!(g.value(y).data, g2.value(y2).data);
        let mut g3 = Graph::<f64>::inference();
        let x3 = g3.input(Array::from_fn(64, 8, |_, _| 1.0), false);
        let y3 = g3.dropout(x3, 0.25);
        assert_eq!(x3, y3);
    }
}

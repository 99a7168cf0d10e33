//! The forward tape and reverse-mode backward pass.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::{Array, Scalar};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

pub(crate) struct BackArgs<'a, T> {
    pub parents: Vec<&'a Array<T>>,
    pub output: &'a Array<T>,
    pub grad: &'a Array<T>,
}

type BackFn<T> = Box<dyn Fn(&BackArgs<'_, T>) -> Vec<Option<Array<T>>> + Send + Sync>;

pub(crate) struct Meta<T> {
    pub parents: Vec<usize>,
    pub backward: Option<BackFn<T>>,
    pub needs_grad: bool,
}

/// One recorded forward pass.
///
/// Values are immutable once created; ops append nodes through `&mut self`.
/// With `grad_enabled = false` no closures are recorded and the tape is a
/// plain evaluator.
pub struct Graph<T: Scalar> {
    pub(crate) values: Vec<Array<T>>,
    pub(crate) metas: Vec<Meta<T>>,
    pub(crate) training: bool,
    pub(crate) grad_enabled: bool,
    pub(crate) rng: ChaCha12Rng,
}

impl<T: Scalar> Graph<T> {
    /// Tape for training: dropout active, gradients recorded.
    pub fn training(seed: u64) -> Self {
        Self {
            values: Vec::new(),
            metas: Vec::new(),
            training: true,
            grad_enabled: true,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Tape for evaluation: dropout off, gradients recorded only if asked.
    pub fn inference() -> Self {
        Self {
            values: Vec::new(),
            metas: Vec::new(),
            training: false,
            grad_enabled: false,
            rng: ChaCha12Rng::seed_from_u64(0),
        }
    }

    /// Evaluation-mode tape that still records gradients (gradient checks).
    pub fn eval_with_grad(seed: u64) -> Self {
        Self {
            values: Vec::new(),
            metas: Vec::new(),
            training: false,
            grad_enabled: true,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn value(&self, v: Var) -> &Array<T> {
        &self.values[v.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Leaf node. `requires_grad` marks it as a gradient target.
    pub fn input(&mut self, value: Array<T>, requires_grad: bool) -> Var {
        self.values.push(value);
        self.metas.push(Meta {
            parents: Vec::new(),
            backward: None,
            needs_grad: requires_grad && self.grad_enabled,
        });
        Var(self.values.len() - 1)
    }

    pub(crate) fn push_op(
        &mut self,
        value: Array<T>,
        parents: Vec<usize>,
        backward: BackFn<T>,
    ) -> Var {
        let needs_grad = self.grad_enabled && parents.iter().any(|&p| self.metas[p].needs_grad);
        self.values.push(value);
        self.metas.push(Meta {
            parents,
            backward: needs_grad.then_some(backward),
            needs_grad,
        });
        Var(self.values.len() - 1)
    }

    /// Reverse pass from a scalar loss. Returns one gradient slot per node;
    /// only nodes on a path from a `requires_grad` leaf to the loss are
    /// populated.
    pub fn backward(&self, loss: Var) -> Vec<Option<Array<T>>> {
        let n = self.values.len();
        let mut grads: Vec<Option<Array<T>>> = (0..n).map(|_| None).collect();
        let (lr, lc) = self.values[loss.0].shape();
        assert_eq!((lr, lc), (1, 1), "backward requires a scalar loss");
        grads[loss.0] = Some(Array::from_vec(1, 1, vec![T::ONE]));
        for i in (0..=loss.0).rev() {
            let Some(grad) = grads[i].take() else {
                continue;
            };
            let meta = &self.metas[i];
            if let Some(backward) = &meta.backward {
                let parents: Vec<&Array<T>> =
                    meta.parents.iter().map(|&p| &self.values[p]).collect();
                let args = BackArgs {
                    parents,
                    output: &self.values[i],
                    grad: &grad,
                };
                let parent_grads = backward(&args);
                debug_assert_eq!(parent_grads.len(), meta.parents.len());
                for (slot, pg) in meta.parents.iter().zip(parent_grads) {
                    let Some(pg) = pg else { continue };
                    if !self.metas[*slot].needs_grad {
                        continue;
                    }
                    match &mut grads[*slot] {
                        Some(existing) => {
                            debug_assert_eq!(existing.shape(), pg.shape());
                            for (e, v) in existing.data.iter_mut().zip(pg.data) {
                                *e += v;
                            }
                        }
                        slot_ref => *slot_ref = Some(pg),
                    }
                }
            }
            if meta.needs_grad && meta.backward.is_none() {
                // Leaf: keep its gradient for the caller.
                grads[i] = Some(grad);
            }
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_chain_backward() {
        // loss = relu(2x + 1) summed; x = [[3, -4]].
        let mut g: Graph<f64> = Graph::eval_with_grad(0);
        let x = g.input(Array::from_vec(1, 2, vec![3.0, -4.0]), true);
        let two = g.input(Array::from_vec(1, 2, vec![2.0, 2.0]), false);
        let one = g.input(Array::from_vec(1, 2, vec![1.0, 1.0]), false);
        let xx = g.mul_elem(x, two);
        let lin = g.add(xx, one);
        let act = g.relu(lin);
        let loss = g.sum_all(act);
        assert_eq!(g.value(loss).item(), 7.0);
        let grads = g.backward(loss);
        let gx = grads[x.0].as_ref().unwrap();
        // d/dx relu(2x+1): 2 where 2x+1 > 0 else 0.
        assert_eq!(gx.data, vec![2.0, 0.0]);
    }

    #[test]
    fn fan_out_accumulates() {
        // loss = sum(x) + sum(x) -> grad = 2 everywhere.
        let mut g: Graph<f64> = Graph::eval_with_grad(0);
        let x = g.input(Array::from_vec(1, 3, vec![1.0, 2.0, 3.0]), true);
        let s1 = g.sum_all(x);
        let s2 = g.sum_all(x);
        let loss = g.add(s1, s2);
        let grads = g.backward(loss);
        assert_eq!(grads[x.0].as_ref().unwrap().data, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn no_grad_mode_records_nothing() {
        let mut g: Graph<f64> = Graph::inference();
        let x = g.input(Array::from_vec(1, 2, vec![1.0, 2.0]), true);
        let y = g.relu(x);
        assert!(g.metas[y.0].backward.is_none());
        assert!(!g.metas[y.0].needs_grad);
    }
}

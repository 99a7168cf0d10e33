//! Bias-corrected adaptive-moment optimizer with decoupled weight decay
//! and per-epoch exponential learning-rate decay.

use super::{Array, Scalar, TensorError};

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Learning-rate multiplier applied at every epoch boundary.
    pub lr_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
            lr_decay: 0.999,
        }
    }
}

/// Optimizer state over a fixed list of parameters.
pub struct AdamW {
    cfg: OptimizerConfig,
    lr: f64,
    step: u64,
    m: Vec<Array<f64>>,
    v: Vec<Array<f64>>,
}

impl AdamW {
    pub fn new<T: Scalar>(params: &[Array<T>], cfg: OptimizerConfig) -> Self {
        let m = params
            .iter()
            .map(|p| Array::zeros(p.rows, p.cols))
            .collect();
        let v = params
            .iter()
            .map(|p| Array::zeros(p.rows, p.cols))
            .collect();
        Self {
            lr: cfg.lr,
            cfg,
            step: 0,
            m,
            v,
        }
    }

    pub fn current_lr(&self) -> f64 {
        self.lr
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Multiply the learning rate by the decay factor (one epoch finished).
    pub fn epoch_boundary(&mut self) {
        self.lr *= self.cfg.lr_decay;
    }

    /// Apply one update. Moments run in f64 regardless of the parameter
    /// dtype. Rejects the whole step if any gradient is non-finite.
    pub fn step<T: Scalar>(
        &mut self,
        names: &[String],
        params: &mut [Array<T>],
        grads: &[Array<T>],
    ) -> Result<(), TensorError> {
        assert_eq!(params.len(), grads.len(), "params/grads length mismatch");
        assert_eq!(
            params.len(),
            self.m.len(),
            "optimizer built for other params"
        );
        for (i, g) in grads.iter().enumerate() {
            if !g.all_finite() {
                let name = names.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
                return Err(TensorError::NonFiniteGrad(name));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            debug_assert_eq!(p.shape(), g.shape());
            for k in 0..p.data.len() {
                let gv = g.data[k].to_f64();
                m.data[k] = self.cfg.beta1 * m.data[k] + (1.0 - self.cfg.beta1) * gv;
                v.data[k] = self.cfg.beta2 * v.data[k] + (1.0 - self.cfg.beta2) * gv * gv;
                let mhat = m.data[k] / bc1;
                let vhat = v.data[k] / bc2;
                let pv = p.data[k].to_f64();
                let update = mhat / (vhat.sqrt() + self.cfg.eps) + self.cfg.weight_decay * pv;
                p.data[k] = T::from_f64(pv - self.lr * update);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grads_and_zero_decay_leave_params() {
        let mut params = vec![Array::<f64>::from_vec(1, 3, vec![1.0, -2.0, 3.0])];
        let names = vec!["w".to_string()];
        let grads = vec![Array::<f64>::zeros(1, 3)];
        let mut opt = AdamW::new(
            &params,
            OptimizerConfig {
                weight_decay: 0.0,
                ..Default::default()
            },
        );
        let before = params[0].clone();
        for _ in 0..5 {
            opt.step(&names, &mut params, &grads).unwrap();
        }
        assert_eq!(params[0], before);
    }

    #[test]
    fn quadratic_converges_to_minimum() {
        // Minimize (x - 0)^2 from x = 5.
        let mut params = vec![Array::<f64>::from_vec(1, 1, vec![5.0])];
        let names = vec!["x".to_string()];
        let mut opt = AdamW::new(
            &params,
            OptimizerConfig {
                lr: 0.05,
                weight_decay: 0.0,
                ..Default::default()
            },
        );
        for _ in 0..500 {
            let x = params[0].data[0];
            let grads = vec![Array::<f64>::from_vec(1, 1, vec![2.0 * x])];
            opt.step(&names, &mut params, &grads).unwrap();
        }
        assert!(params[0].data[0].abs() < 1e-3, "{}", params[0].data[0]);
    }

    #[test]
    fn lr_decays_per_epoch() {
        let params = vec![Array::<f64>::zeros(1, 1)];
        let mut opt = AdamW::new(&params, OptimizerConfig::default());
        for _ in 0..10 {
            opt.epoch_boundary();
        }
        assert!((opt.current_lr() - 0.001 * 0.999f64.powi(10)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_grad_rejected_with_name() {
        let mut params = vec![Array::<f64>::zeros(1, 2)];
        let names = vec!["blocks.0.w".to_string()];
        let grads = vec![Array::<f64>::from_vec(1, 2, vec![0.0, f64::NAN])];
        let mut opt = AdamW::new(&params, OptimizerConfig::default());
        let err = opt.step(&names, &mut params, &grads).unwrap_err();
        assert!(err.to_string().contains("blocks.0.w"));
        assert_eq!(opt.step_count(), 0);
    }
}

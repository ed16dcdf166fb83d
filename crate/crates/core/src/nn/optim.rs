use serde::{Deserialize, Serialize};

use super::{NnError, Result};
use crate::tensor::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// Time-based decay: `lr_t = lr / (1 + decay * iterations)`.
    pub decay: f64,
    pub momentum: f64,
    pub nesterov: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerConfig {
    /// SGD with lr 0.01, decay 1e-6, Nesterov momentum 0.9.
    pub fn sgd() -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            lr: 0.01,
            decay: 1e-6,
            momentum: 0.9,
            nesterov: true,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Adam with lr 0.001, betas (0.9, 0.999), epsilon 1e-8.
    pub fn adam() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr: 0.001,
            decay: 0.0,
            momentum: 0.0,
            nesterov: false,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = lr;
        self
    }

    /// `lr = 0` is accepted so that a step can be an explicit no-op.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NnError::InvalidOptimizer(msg));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be finite and non-negative", self.lr));
        }
        if !(self.decay >= 0.0) {
            return bad(format!("decay {} must be non-negative", self.decay));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} {b} outside (0, 1)"));
            }
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon {} must be positive", self.epsilon));
        }
        Ok(())
    }

    /// Learning rate after `iterations` completed updates.
    pub fn lr_at(&self, iterations: u64) -> f64 {
        self.lr / (1.0 + self.decay * iterations as f64)
    }
}

/// One SGD update. `iterations` counts updates already applied.
///
/// `v <- m v - lr_t g`; plain: `p <- p + v`; Nesterov: `p <- p + m v - lr_t g`.
pub fn sgd_step<T: Scalar>(params: &mut [T], grads: &[T], velocity: &mut [T], iterations: u64, cfg: &OptimizerConfig) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), velocity.len());
    let lr = T::from_f64(cfg.lr_at(iterations));
    let m = T::from_f64(cfg.momentum);
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = m * *v - lr * g;
        if cfg.nesterov {
            *p += m * *v - lr * g;
        } else {
            *p += *v;
        }
    }
}

/// One bias-corrected Adam update. `t` is the 1-based step number.
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], m: &mut [T], v: &mut [T], t: u64, cfg: &OptimizerConfig) {
    assert!(t >= 1, "adam steps are numbered from 1");
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), m.len());
    assert_eq!(params.len(), v.len());
    let lr = T::from_f64(cfg.lr_at(t - 1));
    let (b1, b2) = (T::from_f64(cfg.beta1), T::from_f64(cfg.beta2));
    let c1 = T::from_f64(1.0 - cfg.beta1.powi(t as i32));
    let c2 = T::from_f64(1.0 - cfg.beta2.powi(t as i32));
    let eps = T::from_f64(cfg.epsilon);
    let one = T::one();
    for (((p, &g), mi), vi) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *mi = b1 * *mi + (one - b1) * g;
        *vi = b2 * *vi + (one - b2) * g * g;
        let m_hat = *mi / c1;
        let v_hat = *vi / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Per-parameter optimiser slots plus the shared iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer<T> {
    pub config: OptimizerConfig,
    pub iterations: u64,
    /// Velocity (SGD) or first moment (Adam), one buffer per parameter.
    pub slot_a: Vec<Vec<T>>,
    /// Second moment (Adam only; empty buffers for SGD).
    pub slot_b: Vec<Vec<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(config: OptimizerConfig, sizes: &[usize]) -> Result<Self> {
        config.validate()?;
        let zeros = |on: bool| {
            sizes
                .iter()
                .map(|&n| if on { vec![T::zero(); n] } else { Vec::new() })
                .collect()
        };
        Ok(Self {
            config,
            iterations: 0,
            slot_a: zeros(true),
            slot_b: zeros(config.kind == OptimizerKind::Adam),
        })
    }

    /// Update parameter `index`; call [`Optimizer::finish_step`] once all
    /// parameters are updated.
    pub fn update(&mut self, index: usize, params: &mut [T], grads: &[T]) {
        match self.config.kind {
            OptimizerKind::Sgd => sgd_step(params, grads, &mut self.slot_a[index], self.iterations, &self.config),
            OptimizerKind::Adam => adam_step(
                params,
                grads,
                &mut self.slot_a[index],
                &mut self.slot_b[index],
                self.iterations + 1,
                &self.config,
            ),
        }
    }

    pub fn finish_step(&mut self) {
        self.iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_gradient_step() {
        let cfg = OptimizerConfig {
            momentum: 0.0,
            nesterov: false,
            decay: 0.0,
            ..OptimizerConfig::sgd().with_lr(0.1)
        };
        let (mut p, mut v) = ([1.0f64], [0.0]);
        sgd_step(&mut p, &[1.0], &mut v, 0, &cfg);
        assert!((p[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_noop() {
        let (mut p, mut v) = ([0.7f64, -2.0], [0.0, 0.0]);
        sgd_step(&mut p, &[0.0, 0.0], &mut v, 0, &OptimizerConfig::sgd());
        assert_eq!(p, [0.7, -2.0]);
        let (mut m, mut s) = ([0.0f64; 2], [0.0f64; 2]);
        adam_step(&mut p, &[0.0, 0.0], &mut m, &mut s, 1, &OptimizerConfig::adam());
        assert_eq!(p, [0.7, -2.0]);
    }

    #[test]
    fn validation() {
        assert!(OptimizerConfig::sgd().validate().is_ok());
        let bad = OptimizerConfig { momentum: 1.0, ..OptimizerConfig::sgd() };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig { beta2: 1.0, ..OptimizerConfig::adam() };
        assert!(bad.validate().is_err());
        assert!(OptimizerConfig::adam().with_lr(-1.0).validate().is_err());
    }

    #[test]
    fn decay_schedule() {
        let cfg = OptimizerConfig { decay: 0.5, ..OptimizerConfig::sgd().with_lr(1.0) };
        assert_eq!(cfg.lr_at(0), 1.0);
        assert_eq!(cfg.lr_at(2), 0.5);
    }
}

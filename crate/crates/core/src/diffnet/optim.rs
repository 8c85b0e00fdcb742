use alloc::vec::Vec;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OptimizerKind {
    #[default]
    Adam,
    SgdMomentum,
}

/// Optimizer state over a list of parameter tensors.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: f64,
    momentum: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, momentum: f64, params: &[Tensor<T>]) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        let zeros = || params.iter().map(|p| alloc::vec![T::zero(); p.len()]).collect();
        Ok(Self { kind, lr, momentum, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros(), v: zeros() })
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) {
        self.step += 1;
        match self.kind {
            OptimizerKind::SgdMomentum => {
                let (lr, mu) = (T::of(self.lr), T::of(self.momentum));
                for ((p, g), m) in params.iter_mut().zip(grads).zip(&mut self.m) {
                    for ((w, &g), m) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()) {
                        *m = mu * *m + g;
                        *w -= lr * *m;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = (self.beta1, self.beta2);
                let c1 = 1.0 - libm::pow(b1, self.step as f64);
                let c2 = 1.0 - libm::pow(b2, self.step as f64);
                let lr_t = T::of(self.lr * libm::sqrt(c2) / c1);
                let (b1, b2, eps) = (T::of(b1), T::of(b2), T::of(self.eps));
                let one = T::one();
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    for (((w, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = b1 * *m + (one - b1) * g;
                        *v = b2 * *v + (one - b2) * g * g;
                        *w -= lr_t * *m / (v.sqrt() + eps);
                    }
                }
            }
        }
    }
}

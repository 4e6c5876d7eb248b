use crate::error::{shape, Result};

use super::real::Real;
use super::tensor::Tensor;

/// Adam with bias correction and a per-epoch multiplicative learning-rate decay.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr_decay_per_epoch: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor<T>>, lr: f64) -> Self {
        let m: Vec<Tensor<T>> = params.into_iter().map(|p| Tensor::zeros(&p.dims)).collect();
        Self {
            step: 0,
            v: m.clone(),
            m,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr_decay_per_epoch: 0.95,
        }
    }

    pub fn update(&mut self, params: Vec<&mut Tensor<T>>, grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(shape("optimizer state, parameters and gradients differ in count"));
        }
        self.step += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::of(1.0 - self.beta1.powi(self.step as i32));
        let c2 = T::of(1.0 - self.beta2.powi(self.step as i32));
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));
        let one = T::one();
        // Moments of dead units decay geometrically; subnormals stall the FPU.
        let flush = |x: T| if x.abs() < T::min_positive_value() { T::zero() } else { x };
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if p.dims != g.dims || p.dims != m.dims {
                return Err(shape(format!("gradient {:?} does not match parameter {:?}", g.dims, p.dims)));
            }
            for i in 0..p.len() {
                let gi = g.data[i];
                m.data[i] = flush(b1 * m.data[i] + (one - b1) * gi);
                v.data[i] = flush(b2 * v.data[i] + (one - b2) * gi * gi);
                let m_hat = m.data[i] / c1;
                let v_hat = v.data[i] / c2;
                p.data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    pub fn end_epoch(&mut self) {
        self.lr *= self.lr_decay_per_epoch;
    }
}

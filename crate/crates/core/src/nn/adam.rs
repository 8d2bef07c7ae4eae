use super::network::{Gradients, Network};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam moments and step counter for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(net: &Network, learning_rate: f64) -> Self {
        let zeros = || net.params().iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect::<Vec<_>>();
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, t: 0, m: zeros(), v: zeros() }
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.v
    }

    /// One bias-corrected Adam update. Rejects non-finite gradients without
    /// touching the parameters.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if grads.0.len() != self.m.len() {
            return Err(Error::Dimension { expected: self.m.len(), got: grads.0.len() });
        }
        for (g, m) in grads.0.iter().zip(&self.m) {
            if g.shape() != m.shape() {
                return Err(Error::Usage(format!("gradient shape {:?} != parameter shape {:?}", g.shape(), m.shape())));
            }
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient passed to adam_step".into()));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for (((p, g), m), v) in net.params_mut().into_iter().zip(&grads.0).zip(&mut self.m).zip(&mut self.v) {
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *pi -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

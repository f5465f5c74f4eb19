use super::{Gradients, Mlp};
use crate::error::{Error, Result};

/// Adam with bias correction. Moment buffers follow the parameter order of
/// [`Mlp::param_slices_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub const BETA1: f64 = 0.99;
    pub const BETA2: f64 = 0.999;
    pub const EPSILON: f64 = 1e-8;

    pub fn new(lr: f64, net: &Mlp) -> Self {
        let mut shapes = vec![net.batch_norm().dim(), net.batch_norm().dim()];
        for l in net.layers() {
            shapes.push(l.weights.len());
            shapes.push(l.bias.len());
        }
        Self {
            lr,
            beta1: Self::BETA1,
            beta2: Self::BETA2,
            epsilon: Self::EPSILON,
            step_count: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one update. A non-finite gradient rejects the step and leaves
    /// both the network and the optimizer state untouched.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        let g = grads.slices();
        if g.len() != self.first.len() || g.iter().zip(&self.first).any(|(g, m)| g.len() != m.len()) {
            return Err(Error::Rejected("gradient shapes do not match optimizer state".into()));
        }
        if let Some((slot, idx)) = g
            .iter()
            .enumerate()
            .find_map(|(i, s)| s.iter().position(|v| !v.is_finite()).map(|j| (i, j)))
        {
            return Err(Error::Rejected(format!(
                "non-finite gradient in parameter group {slot}, entry {idx}: {}",
                g[slot][idx]
            )));
        }

        self.step_count += 1;
        let t = self.step_count as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.epsilon);
        for (((params, grad), m), v) in net
            .param_slices_mut()
            .into_iter()
            .zip(g)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for i in 0..params.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        if !net.is_finite() {
            return Err(Error::NonFinite("network parameters after Adam step"));
        }
        Ok(())
    }
}

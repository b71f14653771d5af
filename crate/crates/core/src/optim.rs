//! First-order optimizers over flat parameter slices.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// Adam with decoupled weight decay: every step first shrinks each
/// parameter by `lr · weight_decay`, then applies the bias-corrected
/// adaptive update. Plain gradient descent when `kind` is `Sgd`.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, weight_decay: f64) -> Self {
        Self { kind, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient tensor count");
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let decay = 1.0 - self.lr * self.weight_decay;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            debug_assert_eq!(p.len(), g.len());
            match self.kind {
                OptimizerKind::Sgd => {
                    for (pi, gi) in p.iter_mut().zip(g.iter()) {
                        *pi = *pi * decay - self.lr * gi;
                    }
                }
                OptimizerKind::Adam => {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for i in 0..p.len() {
                        m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                        v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        p[i] = p[i] * decay - self.lr * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
    }
}

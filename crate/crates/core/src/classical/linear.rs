use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, ClassicalError, GraphVector};
use crate::optim::{Optimizer, OptimizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearKind {
    Logistic,
    LinearSvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    pub kind: LinearKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// Coefficient of ½‖w‖² (bias excluded).
    pub l2: f64,
    /// Overrides the balanced (w_neg, w_pos) weights derived from the data.
    pub class_weights: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            kind: LinearKind::Logistic,
            learning_rate: 0.001,
            epochs: 150,
            batch_size: 64,
            optimizer: OptimizerKind::Adam,
            l2: 0.0,
            class_weights: None,
            seed: 2025,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// (w_neg, w_pos)
    pub class_weights: (f64, f64),
}

/// Balanced weights: total / (2 · count_c) for each class.
pub fn class_weights(labels: &[bool]) -> Result<(f64, f64), ClassicalError> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(ClassicalError::SingleClass);
    }
    let total = labels.len() as f64;
    Ok((total / (2.0 * neg as f64), total / (2.0 * pos as f64)))
}

impl LinearModel {
    pub fn zeros(kind: LinearKind, width: usize, class_weights: (f64, f64)) -> Self {
        Self { kind, weights: vec![0.0; width], bias: 0.0, class_weights }
    }

    pub fn width(&self) -> usize {
        self.weights.len()
    }

    pub fn margin(&self, x: &[f64]) -> Result<f64, ClassicalError> {
        if x.len() != self.weights.len() {
            return Err(ClassicalError::WidthMismatch { expected: self.weights.len(), got: x.len() });
        }
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    /// Logistic: σ(w·x + b). SVM: σ of the raw margin, a monotone
    /// calibration into [0, 1].
    pub fn predict_score(&self, x: &GraphVector) -> Result<f64, ClassicalError> {
        self.margin(&x.values).map(sigmoid)
    }

    fn example_loss(&self, m: f64, label: bool) -> f64 {
        let w = if label { self.class_weights.1 } else { self.class_weights.0 };
        match self.kind {
            // −[y log σ(m) + (1−y) log(1−σ(m))] = softplus(m) − y·m
            LinearKind::Logistic => w * (softplus(m) - if label { m } else { 0.0 }),
            LinearKind::LinearSvm => {
                let s = if label { 1.0 } else { -1.0 };
                w * (1.0 - s * m).max(0.0)
            }
        }
    }

    /// d(loss)/d(margin) for one example.
    fn example_dmargin(&self, m: f64, label: bool) -> f64 {
        let w = if label { self.class_weights.1 } else { self.class_weights.0 };
        match self.kind {
            LinearKind::Logistic => w * (sigmoid(m) - if label { 1.0 } else { 0.0 }),
            LinearKind::LinearSvm => {
                let s = if label { 1.0 } else { -1.0 };
                if s * m < 1.0 {
                    -w * s
                } else {
                    0.0
                }
            }
        }
    }

    /// Mean class-weighted loss plus the L2 term.
    pub fn loss(&self, data: &[(GraphVector, bool)], l2: f64) -> Result<f64, ClassicalError> {
        let mut total = 0.0;
        for (x, y) in data {
            total += self.example_loss(self.margin(&x.values)?, *y);
        }
        let reg = 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        Ok(total / data.len() as f64 + reg)
    }

    /// Gradient of [`LinearModel::loss`] as (d/dw, d/db).
    pub fn gradient(&self, data: &[(GraphVector, bool)], l2: f64) -> Result<(Vec<f64>, f64), ClassicalError> {
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = 0.0;
        for (x, y) in data {
            let d = self.example_dmargin(self.margin(&x.values)?, *y);
            for (g, v) in gw.iter_mut().zip(&x.values) {
                *g += d * v;
            }
            gb += d;
        }
        let n = data.len() as f64;
        for (g, w) in gw.iter_mut().zip(&self.weights) {
            *g = *g / n + l2 * w;
        }
        Ok((gw, gb / n))
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn train_linear(train: &[(GraphVector, bool)], cfg: &LinearConfig) -> Result<LinearModel, ClassicalError> {
    train_linear_traced(train, cfg).map(|(m, _)| m)
}

/// Like [`train_linear`], also returning the full-data loss after each epoch.
pub fn train_linear_traced(
    train: &[(GraphVector, bool)],
    cfg: &LinearConfig,
) -> Result<(LinearModel, Vec<f64>), ClassicalError> {
    if cfg.batch_size == 0 || cfg.learning_rate <= 0.0 {
        return Err(ClassicalError::BadConfig("batch_size and learning_rate must be positive".into()));
    }
    let labels: Vec<bool> = train.iter().map(|(_, y)| *y).collect();
    let balanced = class_weights(&labels)?;
    let weights = cfg.class_weights.unwrap_or(balanced);
    if !(weights.0 > 0.0 && weights.1 > 0.0) {
        return Err(ClassicalError::BadConfig("class weights must be positive".into()));
    }
    let width = train[0].0.values.len();
    let mut model = LinearModel::zeros(cfg.kind, width, weights);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            let (gw, gb) = model.gradient(&batch, cfg.l2)?;
            let mut bias = [model.bias];
            opt.step(&mut [&mut model.weights, &mut bias], &[&gw, &[gb]]);
            model.bias = bias[0];
        }
        losses.push(model.loss(train, cfg.l2)?);
    }
    Ok((model, losses))
}

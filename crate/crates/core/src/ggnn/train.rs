use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{forward, loss_and_gradient, Forward, GgnnConfig, GgnnError, GgnnInput, GgnnParams};
use crate::classical::class_weights;
use crate::exec::Exec;
use crate::metrics::confusion;
use crate::optim::{Optimizer, OptimizerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Decoupled: each step scales parameters by (1 − lr · weight_decay).
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub model: GgnnConfig,
    /// Overrides the balanced (w_neg, w_pos) weights derived from the data.
    pub class_weights: Option<(f64, f64)>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 64,
            weight_decay: 0.1,
            max_epochs: 150,
            patience: 20,
            seed: 2025,
            model: GgnnConfig::default(),
            class_weights: None,
            exec: Exec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GgnnError> {
        let bad = |m: &str| Err(GgnnError::BadConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        if let Some((n, p)) = self.class_weights {
            if !(n > 0.0 && p > 0.0) {
                return bad("class weights must be positive");
            }
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Class-weighted mean loss over the epoch's batches.
    pub train_loss: f64,
    pub val_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GgnnModel {
    pub params: GgnnParams,
    pub class_weights: (f64, f64),
    pub train_config: TrainConfig,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl GgnnModel {
    pub fn forward(&self, input: &GgnnInput) -> Result<Forward, GgnnError> {
        forward(&self.params, input)
    }

    pub fn score(&self, input: &GgnnInput) -> Result<f64, GgnnError> {
        self.forward(input).map(|f| f.score())
    }

    pub fn best_val_f1(&self) -> Option<f64> {
        self.history.get(self.best_epoch.checked_sub(1)?).and_then(|r| r.val_f1)
    }
}

/// F1 at threshold 0.5 (score ≥ 0.5 is a positive verdict). Undefined F1
/// counts as 0 for model selection.
fn f1_at_half(p: &GgnnParams, data: &[(GgnnInput, bool)], exec: Exec) -> Result<Option<f64>, GgnnError> {
    let scores = exec.map(data, |(x, _)| forward(p, x).map(|f| f.score()));
    let mut verdicts = Vec::with_capacity(data.len());
    for s in scores {
        verdicts.push(s? >= 0.5);
    }
    let labels: Vec<bool> = data.iter().map(|(_, y)| *y).collect();
    let c = confusion(&verdicts, &labels).map_err(|e| GgnnError::BadConfig(e.to_string()))?;
    Ok(c.f1())
}

/// Gradient of the class-weighted mean loss over `batch`, normalised by the
/// sum of the example weights. Per-graph work runs through `exec`; the sum is
/// taken in batch order.
pub fn batch_gradient(
    p: &GgnnParams,
    data: &[(GgnnInput, bool)],
    batch: &[usize],
    weights: (f64, f64),
    exec: Exec,
) -> Result<(f64, GgnnParams), GgnnError> {
    let results = exec.map(batch, |&i| {
        let (x, y) = &data[i];
        let w = if *y { weights.1 } else { weights.0 };
        loss_and_gradient(p, x, *y, w)
    });
    let norm: f64 = batch.iter().map(|&i| if data[i].1 { weights.1 } else { weights.0 }).sum();
    let mut total = p.zeros_like();
    let mut loss = 0.0;
    for r in results {
        let (l, g) = r?;
        loss += l;
        total.add_assign(&g);
    }
    total.scale(1.0 / norm);
    Ok((loss / norm, total))
}

/// Mini-batch AdamW with early stopping on validation F1. Returns the
/// parameters of the best epoch. Training ends after `patience` epochs
/// without strict improvement, at `max_epochs`, or once validation F1 is
/// 1.0 (no later epoch could replace it).
pub fn train_ggnn(
    train: &[(GgnnInput, bool)],
    val: &[(GgnnInput, bool)],
    cfg: &TrainConfig,
) -> Result<GgnnModel, GgnnError> {
    cfg.validate()?;
    if val.is_empty() {
        return Err(GgnnError::BadConfig("validation split is empty".into()));
    }
    let labels: Vec<bool> = train.iter().map(|(_, y)| *y).collect();
    let weights = match cfg.class_weights {
        Some(w) => w,
        None => class_weights(&labels).map_err(|_| GgnnError::SingleClass)?,
    };
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(GgnnError::SingleClass);
    }

    let mut params = GgnnParams::init(cfg.model, cfg.seed)?;
    let mut opt = Optimizer::new(OptimizerKind::Adam, cfg.learning_rate, cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best = (params.clone(), 0usize, f64::NEG_INFINITY);

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut batches) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let (l, g) = batch_gradient(&params, train, batch, weights, cfg.exec)?;
            if !g.is_finite() {
                return Err(GgnnError::NonFinite);
            }
            let grads = g.tensors();
            opt.step(&mut params.tensors_mut(), &grads);
            loss_sum += l;
            batches += 1;
        }
        let val_f1 = f1_at_half(&params, val, cfg.exec)?;
        history.push(EpochRecord { epoch, train_loss: loss_sum / batches as f64, val_f1 });
        let current = val_f1.unwrap_or(0.0);
        if current > best.2 {
            best = (params.clone(), epoch, current);
        }
        if epoch - best.1 >= cfg.patience || best.2 >= 1.0 {
            break;
        }
    }

    let (params, best_epoch, _) = best;
    Ok(GgnnModel {
        params,
        class_weights: weights,
        train_config: cfg.clone(),
        epochs_run: history.len(),
        best_epoch,
        history,
    })
}

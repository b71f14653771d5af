use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::class_weights;
use super::{ClassicalError, GraphVector};
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split; `None` means round(√width).
    pub feature_subsample: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            feature_subsample: None,
            bootstrap: true,
            seed: 2025,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { positive_fraction: f64, samples: usize },
}

/// Arena-allocated CART tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { positive_fraction, .. } => return *positive_fraction,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub width: usize,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl ForestModel {
    /// Mean leaf fraction over the trees.
    pub fn predict_score(&self, x: &GraphVector) -> Result<f64, ClassicalError> {
        if x.values.len() != self.width {
            return Err(ClassicalError::WidthMismatch { expected: self.width, got: x.values.len() });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(&x.values)).sum();
        Ok(sum / self.trees.len() as f64)
    }
}

struct Builder<'a> {
    xs: &'a [&'a [f64]],
    ys: &'a [bool],
    max_depth: Option<usize>,
    min_leaf: usize,
    max_features: usize,
    nodes: Vec<TreeNode>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let pos = idx.iter().filter(|&&i| self.ys[i]).count();
        self.nodes.push(TreeNode::Leaf { positive_fraction: pos as f64 / idx.len() as f64, samples: idx.len() });
        self.nodes.len() - 1
    }

    /// Best (weighted child impurity, feature, threshold) over a random
    /// feature order, visiting features until `max_features` non-constant
    /// ones have been examined.
    fn best_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<(f64, usize, f64)> {
        let width = self.xs[idx[0]].len();
        let mut features: Vec<usize> = (0..width).collect();
        features.shuffle(rng);
        let n = idx.len();
        let total_pos = idx.iter().filter(|&&i| self.ys[i]).count();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut visited = 0;
        let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(n);
        for f in features {
            if visited >= self.max_features {
                break;
            }
            sorted.clear();
            sorted.extend(idx.iter().map(|&i| (self.xs[i][f], self.ys[i])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            if sorted[0].0 == sorted[n - 1].0 {
                continue;
            }
            visited += 1;
            let mut left_pos = 0;
            for k in 1..n {
                if sorted[k - 1].1 {
                    left_pos += 1;
                }
                if sorted[k].0 == sorted[k - 1].0 || k < self.min_leaf || n - k < self.min_leaf {
                    continue;
                }
                let impurity = (k as f64 * gini(left_pos, k) + (n - k) as f64 * gini(total_pos - left_pos, n - k))
                    / n as f64;
                if best.is_none_or(|(b, _, _)| impurity < b) {
                    best = Some((impurity, f, 0.5 * (sorted[k - 1].0 + sorted[k].0)));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let pos = idx.iter().filter(|&&i| self.ys[i]).count();
        let pure = pos == 0 || pos == idx.len();
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || idx.len() < 2 * self.min_leaf {
            return self.leaf(&idx);
        }
        let parent = gini(pos, idx.len());
        let Some((impurity, feature, threshold)) = self.best_split(&idx, rng) else {
            return self.leaf(&idx);
        };
        if impurity >= parent {
            return self.leaf(&idx);
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.xs[i][feature] <= threshold);
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { positive_fraction: 0.0, samples: 0 });
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[slot] = TreeNode::Split { feature, threshold, left, right };
        slot
    }
}

/// Bootstrap-aggregated CART trees with Gini splits. Tree `k` draws all of
/// its randomness from `seed + k`, so the result does not depend on how the
/// trees are scheduled.
pub fn train_forest(train: &[(GraphVector, bool)], cfg: &ForestConfig) -> Result<ForestModel, ClassicalError> {
    if cfg.n_trees == 0 || cfg.min_leaf == 0 {
        return Err(ClassicalError::BadConfig("n_trees and min_leaf must be positive".into()));
    }
    let ys: Vec<bool> = train.iter().map(|(_, y)| *y).collect();
    class_weights(&ys)?;
    let width = train[0].0.values.len();
    if let Some(bad) = train.iter().find(|(x, _)| x.values.len() != width) {
        return Err(ClassicalError::WidthMismatch { expected: width, got: bad.0.values.len() });
    }
    let xs: Vec<&[f64]> = train.iter().map(|(x, _)| x.values.as_slice()).collect();
    let max_features = cfg.feature_subsample.unwrap_or_else(|| (width as f64).sqrt().round() as usize).clamp(1, width);

    let trees = cfg.exec.map_range(cfg.n_trees, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
        let idx: Vec<usize> = if cfg.bootstrap {
            (0..xs.len()).map(|_| rng.random_range(0..xs.len())).collect()
        } else {
            (0..xs.len()).collect()
        };
        let mut b = Builder { xs: &xs, ys: &ys, max_depth: cfg.max_depth, min_leaf: cfg.min_leaf, max_features, nodes: Vec::new() };
        b.grow(idx, 0, &mut rng);
        Tree { nodes: b.nodes }
    });
    Ok(ForestModel { trees, width, n_trees: cfg.n_trees, max_depth: cfg.max_depth, min_leaf: cfg.min_leaf, seed: cfg.seed })
}

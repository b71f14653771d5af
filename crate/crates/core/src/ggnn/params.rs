use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GgnnError;
use crate::encoding::FEATURE_WIDTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GgnnConfig {
    pub hidden_dim: usize,
    /// Propagation rounds.
    pub steps: usize,
    /// Width of the node annotation; must not exceed `hidden_dim` since the
    /// initial state is the annotation zero-padded.
    pub input_dim: usize,
    /// Width of an externally supplied per-graph embedding concatenated to
    /// the pooled graph embedding before the head. 0 disables fusion.
    pub external_dim: usize,
}

impl Default for GgnnConfig {
    fn default() -> Self {
        Self { hidden_dim: 128, steps: 8, input_dim: FEATURE_WIDTH, external_dim: 0 }
    }
}

impl GgnnConfig {
    pub fn validate(&self) -> Result<(), GgnnError> {
        if self.hidden_dim == 0 || self.input_dim == 0 {
            return Err(GgnnError::BadConfig("hidden_dim and input_dim must be positive".into()));
        }
        if self.input_dim > self.hidden_dim {
            return Err(GgnnError::BadConfig(format!(
                "input_dim {} exceeds hidden_dim {}",
                self.input_dim, self.hidden_dim
            )));
        }
        Ok(())
    }

    pub fn head_width(&self) -> usize {
        self.hidden_dim + self.external_dim
    }
}

/// Two-logit linear classifier over a (possibly fused) graph embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    /// 2 × width
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearHead {
    pub fn zeros(width: usize) -> Self {
        Self { weight: Array2::zeros((2, width)), bias: Array1::zeros(2) }
    }

    pub fn width(&self) -> usize {
        self.weight.ncols()
    }
}

/// All trainable tensors. Matrices map row vectors as `x · Wᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GgnnParams {
    pub config: GgnnConfig,
    /// Messages from predecessors (incoming edges).
    pub w_in: Array2<f64>,
    /// Messages from successors (outgoing edges).
    pub w_out: Array2<f64>,
    pub b_msg: Array1<f64>,
    pub w_z: Array2<f64>,
    pub u_z: Array2<f64>,
    pub b_z: Array1<f64>,
    pub w_r: Array2<f64>,
    pub u_r: Array2<f64>,
    pub b_r: Array1<f64>,
    pub w_h: Array2<f64>,
    pub u_h: Array2<f64>,
    pub b_h: Array1<f64>,
    /// Attention gate over [h ‖ x] → scalar.
    pub gate_w: Array1<f64>,
    pub gate_b: Array1<f64>,
    /// Output network over [h ‖ x] → hidden.
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
    pub head: LinearHead,
}

macro_rules! tensor_fields {
    ($self:ident, $view:ident) => {
        vec![
            $self.w_in.$view(),
            $self.w_out.$view(),
            $self.b_msg.$view(),
            $self.w_z.$view(),
            $self.u_z.$view(),
            $self.b_z.$view(),
            $self.w_r.$view(),
            $self.u_r.$view(),
            $self.b_r.$view(),
            $self.w_h.$view(),
            $self.u_h.$view(),
            $self.b_h.$view(),
            $self.gate_w.$view(),
            $self.gate_b.$view(),
            $self.out_w.$view(),
            $self.out_b.$view(),
            $self.head.weight.$view(),
            $self.head.bias.$view(),
        ]
    };
}

pub const TENSOR_NAMES: [&str; 18] = [
    "w_in", "w_out", "b_msg", "w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h", "gate_w", "gate_b",
    "out_w", "out_b", "head.weight", "head.bias",
];

impl GgnnParams {
    pub fn zeros(config: GgnnConfig) -> Result<Self, GgnnError> {
        config.validate()?;
        let d = config.hidden_dim;
        let pool_in = d + config.input_dim;
        let sq = || Array2::zeros((d, d));
        let vd = || Array1::zeros(d);
        Ok(Self {
            config,
            w_in: sq(),
            w_out: sq(),
            b_msg: vd(),
            w_z: sq(),
            u_z: sq(),
            b_z: vd(),
            w_r: sq(),
            u_r: sq(),
            b_r: vd(),
            w_h: sq(),
            u_h: sq(),
            b_h: vd(),
            gate_w: Array1::zeros(pool_in),
            gate_b: Array1::zeros(1),
            out_w: Array2::zeros((d, pool_in)),
            out_b: vd(),
            head: LinearHead::zeros(config.head_width()),
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(config: GgnnConfig, seed: u64) -> Result<Self, GgnnError> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.hidden_dim;
        let pool_in = d + config.input_dim;
        let mut glorot = |m: &mut Array2<f64>, fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            m.iter_mut().for_each(|w| *w = rng.random_range(-a..a));
        };
        for m in [&mut p.w_in, &mut p.w_out, &mut p.w_z, &mut p.u_z, &mut p.w_r, &mut p.u_r, &mut p.w_h, &mut p.u_h] {
            glorot(m, d, d);
        }
        glorot(&mut p.out_w, pool_in, d);
        glorot(&mut p.head.weight, config.head_width(), 2);
        let mut gate = Array2::zeros((1, pool_in));
        glorot(&mut gate, pool_in, 1);
        p.gate_w = gate.row(0).to_owned();
        Ok(p)
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        tensor_fields!(self, as_slice).into_iter().map(|s| s.expect("standard layout")).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        tensor_fields!(self, as_slice_mut).into_iter().map(|s| s.expect("standard layout")).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config).expect("config already validated")
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= k);
        }
    }

    /// Rebuilds non-standard-layout arrays (possible after deserialization)
    /// and checks shapes against the config.
    pub fn normalize(mut self) -> Result<Self, GgnnError> {
        let reference = Self::zeros(self.config)?;
        let fix2 = |a: &mut Array2<f64>, want: &Array2<f64>| -> Result<(), GgnnError> {
            if a.dim() != want.dim() {
                return Err(GgnnError::DimensionMismatch(format!("{:?} vs {:?}", a.dim(), want.dim())));
            }
            if !a.is_standard_layout() {
                *a = a.as_standard_layout().to_owned();
            }
            Ok(())
        };
        let fix1 = |a: &Array1<f64>, want: &Array1<f64>| -> Result<(), GgnnError> {
            if a.len() != want.len() {
                return Err(GgnnError::DimensionMismatch(format!("{} vs {}", a.len(), want.len())));
            }
            Ok(())
        };
        fix2(&mut self.w_in, &reference.w_in)?;
        fix2(&mut self.w_out, &reference.w_out)?;
        fix2(&mut self.w_z, &reference.w_z)?;
        fix2(&mut self.u_z, &reference.u_z)?;
        fix2(&mut self.w_r, &reference.w_r)?;
        fix2(&mut self.u_r, &reference.u_r)?;
        fix2(&mut self.w_h, &reference.w_h)?;
        fix2(&mut self.u_h, &reference.u_h)?;
        fix2(&mut self.out_w, &reference.out_w)?;
        fix2(&mut self.head.weight, &reference.head.weight)?;
        for (a, want) in [
            (&self.b_msg, &reference.b_msg),
            (&self.b_z, &reference.b_z),
            (&self.b_r, &reference.b_r),
            (&self.b_h, &reference.b_h),
            (&self.gate_w, &reference.gate_w),
            (&self.gate_b, &reference.gate_b),
            (&self.out_b, &reference.out_b),
            (&self.head.bias, &reference.head.bias),
        ] {
            fix1(a, want)?;
        }
        Ok(self)
    }
}

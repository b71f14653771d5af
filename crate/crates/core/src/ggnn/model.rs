use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::{GgnnError, GgnnParams, LinearHead};
use crate::classical::sigmoid;
use crate::encoding::EncodedGraph;

/// A graph prepared for the network: dense annotations, edge list in node
/// index space, and an optional external embedding for the fusion head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GgnnInput {
    pub annotations: Array2<f64>,
    pub edges: Vec<(usize, usize)>,
    pub external: Array1<f64>,
}

impl GgnnInput {
    pub fn new(annotations: Array2<f64>, edges: Vec<(usize, usize)>, external: Array1<f64>) -> Result<Self, GgnnError> {
        let n = annotations.nrows();
        if n == 0 {
            return Err(GgnnError::EmptyGraph);
        }
        if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= n || b >= n) {
            return Err(GgnnError::DimensionMismatch(format!("edge ({a}, {b}) out of range for {n} nodes")));
        }
        if !annotations.iter().chain(external.iter()).all(|v| v.is_finite()) {
            return Err(GgnnError::NonFinite);
        }
        Ok(Self { annotations, edges, external })
    }

    pub fn from_encoded(eg: &EncodedGraph, external: Option<&[f64]>) -> Result<Self, GgnnError> {
        let n = eg.num_nodes();
        let width = eg.node_features.first().map_or(0, |f| f.features.len());
        let annotations = Array2::from_shape_vec((n, width), eg.feature_matrix())
            .map_err(|e| GgnnError::DimensionMismatch(e.to_string()))?;
        let external = Array1::from(external.map(<[f64]>::to_vec).unwrap_or_default());
        Self::new(annotations, eg.edges.clone(), external)
    }

    pub fn num_nodes(&self) -> usize {
        self.annotations.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub logits: [f64; 2],
    pub embedding: Array1<f64>,
    /// Attention gate per node.
    pub gates: Array1<f64>,
    /// tanh(f_out(·)) per node.
    pub outputs: Array2<f64>,
}

impl Forward {
    /// P(vulnerable) = softmax(logits)[1].
    pub fn score(&self) -> f64 {
        sigmoid(self.logits[1] - self.logits[0])
    }
}

struct StepCache {
    h: Array2<f64>,
    a: Array2<f64>,
    z: Array2<f64>,
    r: Array2<f64>,
    c: Array2<f64>,
}

struct Cache {
    steps: Vec<StepCache>,
    pool_in: Array2<f64>,
    fused: Array1<f64>,
}

fn sigmoid_inplace(m: &mut Array2<f64>) {
    m.mapv_inplace(sigmoid);
}

fn check_dims(p: &GgnnParams, input: &GgnnInput) -> Result<(), GgnnError> {
    let cfg = &p.config;
    if input.num_nodes() == 0 {
        return Err(GgnnError::EmptyGraph);
    }
    if input.annotations.ncols() != cfg.input_dim {
        return Err(GgnnError::DimensionMismatch(format!(
            "annotation width {} but model expects {}",
            input.annotations.ncols(),
            cfg.input_dim
        )));
    }
    if input.external.len() != cfg.external_dim {
        return Err(GgnnError::DimensionMismatch(format!(
            "external embedding width {} but model expects {}",
            input.external.len(),
            cfg.external_dim
        )));
    }
    Ok(())
}

/// Σ over in-edges of `m_in[src]` + Σ over out-edges of `m_out[dst]` + bias,
/// accumulated in edge-list order.
fn aggregate(h: &Array2<f64>, p: &GgnnParams, edges: &[(usize, usize)]) -> Array2<f64> {
    let m_in = h.dot(&p.w_in.t());
    let m_out = h.dot(&p.w_out.t());
    let mut a = Array2::zeros(h.raw_dim());
    a += &p.b_msg;
    for &(src, dst) in edges {
        let mut row = a.row_mut(dst);
        row += &m_in.row(src);
        let mut row = a.row_mut(src);
        row += &m_out.row(dst);
    }
    a
}

fn run(p: &GgnnParams, input: &GgnnInput, keep: bool) -> Result<(Forward, Option<Cache>), GgnnError> {
    check_dims(p, input)?;
    let cfg = &p.config;
    let n = input.num_nodes();
    let mut h = Array2::zeros((n, cfg.hidden_dim));
    h.slice_mut(s![.., ..cfg.input_dim]).assign(&input.annotations);

    let mut steps = Vec::with_capacity(if keep { cfg.steps } else { 0 });
    for _ in 0..cfg.steps {
        let a = aggregate(&h, p, &input.edges);
        let mut z = a.dot(&p.w_z.t()) + h.dot(&p.u_z.t()) + &p.b_z;
        sigmoid_inplace(&mut z);
        let mut r = a.dot(&p.w_r.t()) + h.dot(&p.u_r.t()) + &p.b_r;
        sigmoid_inplace(&mut r);
        let rh = &r * &h;
        let mut c = a.dot(&p.w_h.t()) + rh.dot(&p.u_h.t()) + &p.b_h;
        c.mapv_inplace(f64::tanh);
        let next = &h + &(&z * &(&c - &h));
        if keep {
            steps.push(StepCache { h, a, z, r, c });
        }
        h = next;
    }

    let pool_in = concatenate(Axis(1), &[h.view(), input.annotations.view()]).expect("row counts agree");
    let gates = (pool_in.dot(&p.gate_w) + p.gate_b[0]).mapv(sigmoid);
    let outputs = (pool_in.dot(&p.out_w.t()) + &p.out_b).mapv(f64::tanh);
    let embedding = gates.dot(&outputs);
    let fused = concatenate(Axis(0), &[embedding.view(), input.external.view()]).expect("1-d");
    let logits = head_logits(&p.head, fused.view());
    let cache = keep.then(|| Cache { steps, pool_in, fused });
    Ok((Forward { logits, embedding, gates, outputs }, cache))
}

fn head_logits(head: &LinearHead, z: ArrayView1<f64>) -> [f64; 2] {
    let l = head.weight.dot(&z) + &head.bias;
    [l[0], l[1]]
}

pub fn forward(p: &GgnnParams, input: &GgnnInput) -> Result<Forward, GgnnError> {
    run(p, input, false).map(|(f, _)| f)
}

/// Logits and pooled graph embedding for an encoded graph.
pub fn ggnn_forward(eg: &EncodedGraph, p: &GgnnParams) -> Result<([f64; 2], Array1<f64>), GgnnError> {
    let input = GgnnInput::from_encoded(eg, None)?;
    forward(p, &input).map(|f| (f.logits, f.embedding))
}

/// head(graph_embedding ‖ external_embedding).
pub fn fuse_and_classify(
    graph_embedding: &[f64],
    external_embedding: &[f64],
    head: &LinearHead,
) -> Result<[f64; 2], GgnnError> {
    let width = graph_embedding.len() + external_embedding.len();
    if width != head.width() {
        return Err(GgnnError::DimensionMismatch(format!("fused width {width} but head expects {}", head.width())));
    }
    if !graph_embedding.iter().chain(external_embedding).all(|v| v.is_finite()) {
        return Err(GgnnError::NonFinite);
    }
    let z: Array1<f64> = graph_embedding.iter().chain(external_embedding).copied().collect();
    Ok(head_logits(head, z.view()))
}

/// Weighted negative log-softmax of the true class, computed as
/// softplus(l_other − l_true) to stay accurate for confident logits.
pub fn loss(logits: [f64; 2], label: bool, weight: f64) -> f64 {
    let (target, other) = if label { (logits[1], logits[0]) } else { (logits[0], logits[1]) };
    let x = other - target;
    let softplus = if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    weight * softplus
}

fn dloss(logits: [f64; 2], label: bool, weight: f64) -> [f64; 2] {
    let p1 = sigmoid(logits[1] - logits[0]);
    let y1 = if label { 1.0 } else { 0.0 };
    [weight * ((1.0 - p1) - (1.0 - y1)), weight * (p1 - y1)]
}

/// Loss and its gradient with respect to every parameter for one graph.
pub fn loss_and_gradient(
    p: &GgnnParams,
    input: &GgnnInput,
    label: bool,
    weight: f64,
) -> Result<(f64, GgnnParams), GgnnError> {
    let (fwd, cache) = run(p, input, true)?;
    let cache = cache.expect("cache requested");
    let mut g = p.zeros_like();
    let d = p.config.hidden_dim;

    let dl = dloss(fwd.logits, label, weight);
    let dl = Array1::from(dl.to_vec());
    g.head.weight.assign(&outer(&dl, &cache.fused));
    g.head.bias.assign(&dl.clone());
    let dfused = p.head.weight.t().dot(&dl);
    let de = dfused.slice(s![..d]).to_owned();

    // embedding = Σ_v g_v · O_v
    let dg = fwd.outputs.dot(&de);
    let dout = outer(&fwd.gates, &de);
    let dout_pre = dout * fwd.outputs.mapv(|o| 1.0 - o * o);
    g.out_w.assign(&dout_pre.t().dot(&cache.pool_in));
    g.out_b.assign(&dout_pre.sum_axis(Axis(0)));
    let mut dpool = dout_pre.dot(&p.out_w);
    let dg_pre = dg * fwd.gates.mapv(|v| v * (1.0 - v));
    g.gate_w.assign(&cache.pool_in.t().dot(&dg_pre));
    g.gate_b[0] = dg_pre.sum();
    dpool += &outer(&dg_pre, &p.gate_w);
    let mut dh = dpool.slice(s![.., ..d]).to_owned();

    let edges = &input.edges;
    for step in cache.steps.iter().rev() {
        let StepCache { h, a, z, r, c } = step;
        let dz = &dh * &(c - h);
        let dc = &dh * z;
        let mut dh_prev = &dh * &z.mapv(|v| 1.0 - v);

        let dc_pre = dc * c.mapv(|v| 1.0 - v * v);
        let rh = r * h;
        g.w_h += &dc_pre.t().dot(a);
        g.u_h += &dc_pre.t().dot(&rh);
        g.b_h += &dc_pre.sum_axis(Axis(0));
        let mut da = dc_pre.dot(&p.w_h);
        let drh = dc_pre.dot(&p.u_h);
        dh_prev += &(&drh * r);
        let dr = drh * h;

        let dr_pre = dr * r.mapv(|v| v * (1.0 - v));
        g.w_r += &dr_pre.t().dot(a);
        g.u_r += &dr_pre.t().dot(h);
        g.b_r += &dr_pre.sum_axis(Axis(0));
        da += &dr_pre.dot(&p.w_r);
        dh_prev += &dr_pre.dot(&p.u_r);

        let dz_pre = dz * z.mapv(|v| v * (1.0 - v));
        g.w_z += &dz_pre.t().dot(a);
        g.u_z += &dz_pre.t().dot(h);
        g.b_z += &dz_pre.sum_axis(Axis(0));
        da += &dz_pre.dot(&p.w_z);
        dh_prev += &dz_pre.dot(&p.u_z);

        g.b_msg += &da.sum_axis(Axis(0));
        let mut dm_in = Array2::zeros(h.raw_dim());
        let mut dm_out = Array2::zeros(h.raw_dim());
        for &(src, dst) in edges {
            let mut row = dm_in.row_mut(src);
            row += &da.row(dst);
            let mut row = dm_out.row_mut(dst);
            row += &da.row(src);
        }
        g.w_in += &dm_in.t().dot(h);
        g.w_out += &dm_out.t().dot(h);
        dh_prev += &dm_in.dot(&p.w_in);
        dh_prev += &dm_out.dot(&p.w_out);
        dh = dh_prev;
    }

    Ok((loss(fwd.logits, label, weight), g))
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let col = a.view().insert_axis(Axis(1));
    let row = b.view().insert_axis(Axis(0));
    col.dot(&row)
}

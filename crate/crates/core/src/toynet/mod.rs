//! A small point-cloud classifier with hand-written backpropagation.
//!
//! Pipeline per cloud: farthest-point queries, padded ball neighborhoods,
//! per-neighborhood alignment into the first layer's weight frame, a shared
//! ReLU MLP, max-pool within each neighborhood, max-pool across
//! neighborhoods, and a linear classifier.
//!
//! The weight frame and the local frames are treated as constants when
//! differentiating: gradients flow into the weights through `W̃ᵀx` only.

mod checkpoint;
mod gradcheck;
mod train;

pub use checkpoint::{read_checkpoint, read_checkpoint_from, write_checkpoint, write_checkpoint_to, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use train::{evaluate, train, Adam, EpochStats, TrainOptions, TrainReport};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Seed};
use crate::linalg3::{self, Vec3};
use crate::neighbors::{farthest_point_sample, radius_neighbors, NeighborSet};
use crate::wfa::{
    alignment_rotation, local_frame, weight_frame, weight_frame_or_fallback, AxisOrder, LayerWeights, LocalFrame,
    WeightFrame, WfaConfig, DEFAULT_GAP_TOL, DEFAULT_RANK_TOL, DEFAULT_SIGN_TOL,
};

/// Redraws allowed when the initial first layer has an unusable frame.
pub const MAX_INIT_REDRAWS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub num_queries: usize,
    pub neighbors_per_query: usize,
    pub radius: f64,
    /// Width of every hidden layer; the first entry is the aligned layer.
    pub hidden_widths: Vec<usize>,
    pub num_classes: usize,
    pub axis_order: AxisOrder,
    /// When false, neighborhoods enter the first layer as raw centered
    /// coordinates (the non-invariant baseline).
    pub use_wfa: bool,
    pub seed: Seed,
    pub sign_tol: f64,
    pub gap_tol: f64,
    pub rank_tol: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            num_queries: 32,
            neighbors_per_query: 16,
            radius: 0.35,
            hidden_widths: vec![64, 128],
            num_classes: 5,
            axis_order: AxisOrder::default(),
            use_wfa: true,
            seed: Seed(0),
            sign_tol: DEFAULT_SIGN_TOL,
            gap_tol: DEFAULT_GAP_TOL,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let count = |what: &'static str, count: usize, min: usize| {
            if count < min {
                Err(Error::BadCount {
                    what,
                    count,
                    min,
                    max: usize::MAX,
                })
            } else {
                Ok(())
            }
        };
        count("num_queries", self.num_queries, 1)?;
        count("neighbors_per_query", self.neighbors_per_query, 3)?;
        count("num_classes", self.num_classes, 1)?;
        count("hidden layers", self.hidden_widths.len(), 1)?;
        count("first layer width", self.hidden_widths[0], 3)?;
        for &w in &self.hidden_widths[1..] {
            count("hidden width", w, 1)?;
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::BadRadius(self.radius));
        }
        for tol in [self.sign_tol, self.gap_tol, self.rank_tol] {
            if !(tol > 0.0) || !tol.is_finite() {
                return Err(Error::BadTolerance(tol));
            }
        }
        Ok(())
    }

    pub fn wfa_config(&self) -> WfaConfig {
        WfaConfig {
            sign_tol: self.sign_tol,
            gap_tol: self.gap_tol,
            rank_tol: self.rank_tol,
            order: self.axis_order,
        }
    }

    fn feature_width(&self) -> usize {
        *self.hidden_widths.last().expect("validated")
    }
}

/// Fully connected layer; `weight[i * outputs + o]` maps input `i` to output `o`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.len() != inputs * outputs || bias.len() != outputs {
            return Err(Error::ShapeMismatch(format!(
                "dense {inputs}x{outputs} given {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dense layer parameters"));
        }
        Ok(Self {
            inputs,
            outputs,
            weight,
            bias,
        })
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weight[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }
}

/// All trainable parameters.
///
/// The flat layout (used by gradients, the optimizer and finite differences)
/// is: first-layer weight points `w_k` (x, y, z each), first-layer biases,
/// then weight and bias of every hidden dense layer, then the classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub first: LayerWeights,
    pub hidden: Vec<Dense>,
    pub classifier: Dense,
}

fn glorot<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-a..=a)).collect()
}

impl NetworkParams {
    /// Glorot-uniform weights, zero biases. The first layer is redrawn until
    /// its weight frame is clean.
    pub fn init(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = cfg.seed.derive(0).rng();
        let d = cfg.hidden_widths[0];
        let mut first = None;
        for _ in 0..MAX_INIT_REDRAWS {
            let flat = glorot(&mut rng, 3, d, 3 * d);
            let cols: Vec<Vec3> = flat.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            let w = LayerWeights::new(cols, vec![0.0; d])?;
            if let Ok(wf) = weight_frame(&w, cfg.sign_tol, cfg.rank_tol) {
                if wf.is_clean(cfg.gap_tol) {
                    first = Some(w);
                    break;
                }
            }
        }
        let first = first.ok_or_else(|| {
            Error::InvalidConfig(format!("no usable first layer after {MAX_INIT_REDRAWS} draws"))
        })?;
        let mut hidden = Vec::new();
        for pair in cfg.hidden_widths.windows(2) {
            let (i, o) = (pair[0], pair[1]);
            hidden.push(Dense::new(i, o, glorot(&mut rng, i, o, i * o), vec![0.0; o])?);
        }
        let (i, o) = (cfg.feature_width(), cfg.num_classes);
        let classifier = Dense::new(i, o, glorot(&mut rng, i, o, i * o), vec![0.0; o])?;
        Ok(Self {
            first,
            hidden,
            classifier,
        })
    }

    /// All-zero parameters of the right shape.
    pub fn zeros(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.hidden_widths[0];
        Ok(Self {
            first: LayerWeights::new(vec![[0.0; 3]; d], vec![0.0; d])?,
            hidden: cfg.hidden_widths.windows(2).map(|p| Dense::zeros(p[0], p[1])).collect(),
            classifier: Dense::zeros(cfg.feature_width(), cfg.num_classes),
        })
    }

    pub fn num_params(&self) -> usize {
        4 * self.first.width()
            + self.hidden.iter().map(|l| l.weight.len() + l.bias.len()).sum::<usize>()
            + self.classifier.weight.len()
            + self.classifier.bias.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for c in self.first.columns() {
            out.extend_from_slice(c);
        }
        out.extend_from_slice(self.first.bias());
        for l in self.hidden.iter().chain(std::iter::once(&self.classifier)) {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Parameters with this network's shapes and the given flat values.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut rest = flat;
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head.to_vec()
        };
        let d = self.first.width();
        let cols: Vec<Vec3> = take(3 * d).chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        let first = LayerWeights::new(cols, take(d))?;
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for l in &self.hidden {
            let w = take(l.weight.len());
            hidden.push(Dense::new(l.inputs, l.outputs, w, take(l.outputs))?);
        }
        let c = &self.classifier;
        let w = take(c.weight.len());
        let classifier = Dense::new(c.inputs, c.outputs, w, take(c.outputs))?;
        Ok(Self {
            first,
            hidden,
            classifier,
        })
    }

    /// Errors unless the shapes agree with `cfg`.
    pub fn check_shapes(&self, cfg: &NetworkConfig) -> Result<()> {
        let widths: Vec<usize> = std::iter::once(self.first.width())
            .chain(self.hidden.iter().map(|l| l.outputs))
            .collect();
        let chained = self.hidden.iter().zip(&widths).all(|(l, &w)| l.inputs == w);
        if widths != cfg.hidden_widths
            || !chained
            || self.classifier.inputs != cfg.feature_width()
            || self.classifier.outputs != cfg.num_classes
        {
            return Err(Error::ShapeMismatch(format!(
                "parameters with widths {widths:?} and {} classes do not match config widths {:?} and {} classes",
                self.classifier.outputs, cfg.hidden_widths, cfg.num_classes
            )));
        }
        Ok(())
    }

    /// Frame of the first layer; degenerate weights give the flagged fallback.
    pub fn weight_frame(&self, cfg: &NetworkConfig) -> Result<WeightFrame> {
        weight_frame_or_fallback(&self.first, cfg.sign_tol, cfg.rank_tol)
    }
}

/// One query neighborhood with its local frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub neighbors: NeighborSet,
    pub frame: LocalFrame,
    /// `p_j − p̄_i` for every member.
    pub centered: Vec<Vec3>,
}

/// The weight-independent part of the pipeline for one cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedCloud {
    pub queries: Vec<usize>,
    pub groups: Vec<Group>,
}

impl PreparedCloud {
    pub fn all_frames_clean(&self) -> bool {
        self.groups.iter().all(|g| g.frame.is_clean())
    }
}

pub fn prepare(cloud: &PointCloud, cfg: &NetworkConfig) -> Result<PreparedCloud> {
    cfg.validate()?;
    if cloud.len() < cfg.num_queries {
        return Err(Error::ShapeMismatch(format!(
            "cloud has {} points but {} queries were requested",
            cloud.len(),
            cfg.num_queries
        )));
    }
    let queries = farthest_point_sample(cloud, cfg.num_queries, 0)?;
    let mut groups = Vec::with_capacity(queries.len());
    for &q in &queries {
        let neighbors = radius_neighbors(cloud, q, cfg.radius, cfg.neighbors_per_query)?;
        let frame = local_frame(cloud, &neighbors, cfg.sign_tol, cfg.gap_tol)?;
        let centered = neighbors
            .indices
            .iter()
            .map(|&j| linalg3::sub(&cloud.point(j), &frame.barycenter))
            .collect();
        groups.push(Group {
            neighbors,
            frame,
            centered,
        });
    }
    Ok(PreparedCloud { queries, groups })
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCache {
    /// First-layer input per grouped point (group-major).
    inputs: Vec<Vec3>,
    /// Pre-activations per layer, point-major (`point * width + unit`).
    pre: Vec<Vec<f64>>,
    /// Winning point (global index) per group and feature.
    group_argmax: Vec<usize>,
    /// Winning group per feature.
    global_argmax: Vec<usize>,
    pub pooled: Vec<f64>,
    pub logits: Vec<f64>,
}

impl ForwardCache {
    /// True when both passes took the same ReLU branches and max-pool winners,
    /// so the network is the same smooth function at both points.
    pub fn same_pattern(&self, other: &ForwardCache) -> bool {
        self.group_argmax == other.group_argmax
            && self.global_argmax == other.global_argmax
            && self.pre.len() == other.pre.len()
            && self
                .pre
                .iter()
                .zip(&other.pre)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (*x > 0.0) == (*y > 0.0)))
    }
}

pub fn forward(params: &NetworkParams, cloud: &PointCloud, cfg: &NetworkConfig) -> Result<(Vec<f64>, ForwardCache)> {
    let prepared = prepare(cloud, cfg)?;
    let wf = params.weight_frame(cfg)?;
    forward_prepared(params, &prepared, cfg, &wf)
}

/// Forward pass with an explicit weight frame (used to hold the frame fixed).
pub fn forward_prepared(
    params: &NetworkParams,
    prepared: &PreparedCloud,
    cfg: &NetworkConfig,
    wf: &WeightFrame,
) -> Result<(Vec<f64>, ForwardCache)> {
    params.check_shapes(cfg)?;
    let k = cfg.neighbors_per_query;
    if prepared.groups.len() != cfg.num_queries || prepared.groups.iter().any(|g| g.centered.len() != k) {
        return Err(Error::ShapeMismatch("prepared cloud does not match the config".into()));
    }

    let mut inputs = Vec::with_capacity(cfg.num_queries * k);
    for g in &prepared.groups {
        if cfg.use_wfa {
            let r = alignment_rotation(wf, &g.frame, cfg.axis_order);
            inputs.extend(g.centered.iter().map(|x| r.apply(x)));
        } else {
            inputs.extend_from_slice(&g.centered);
        }
    }
    let n = inputs.len();

    let d = params.first.width();
    let centered_w = params.first.centered();
    let mut z1 = vec![0.0; n * d];
    for (p, x) in inputs.iter().enumerate() {
        let row = &mut z1[p * d..(p + 1) * d];
        for ((z, w), b) in row.iter_mut().zip(&centered_w).zip(params.first.bias()) {
            *z = linalg3::dot(w, x) + b;
        }
    }
    let mut pre = vec![z1];
    for layer in &params.hidden {
        let prev = pre.last().expect("first layer present");
        let mut act = vec![0.0; layer.inputs];
        let mut z = vec![0.0; n * layer.outputs];
        for p in 0..n {
            for (a, &v) in act.iter_mut().zip(&prev[p * layer.inputs..(p + 1) * layer.inputs]) {
                *a = v.max(0.0);
            }
            layer.apply(&act, &mut z[p * layer.outputs..(p + 1) * layer.outputs]);
        }
        pre.push(z);
    }

    let width = cfg.feature_width();
    let last = pre.last().expect("first layer present");
    let q = cfg.num_queries;
    let mut group_max = vec![0.0; q * width];
    let mut group_argmax = vec![0usize; q * width];
    for g in 0..q {
        for c in 0..width {
            let mut best = (f64::NEG_INFINITY, 0);
            for j in 0..k {
                let p = g * k + j;
                let v = last[p * width + c].max(0.0);
                if v > best.0 {
                    best = (v, p);
                }
            }
            group_max[g * width + c] = best.0;
            group_argmax[g * width + c] = best.1;
        }
    }
    let mut pooled = vec![0.0; width];
    let mut global_argmax = vec![0usize; width];
    for c in 0..width {
        let mut best = (f64::NEG_INFINITY, 0);
        for g in 0..q {
            let v = group_max[g * width + c];
            if v > best.0 {
                best = (v, g);
            }
        }
        pooled[c] = best.0;
        global_argmax[c] = best.1;
    }
    let mut logits = vec![0.0; cfg.num_classes];
    params.classifier.apply(&pooled, &mut logits);

    Ok((
        logits.clone(),
        ForwardCache {
            inputs,
            pre,
            group_argmax,
            global_argmax,
            pooled,
            logits,
        },
    ))
}

/// Adds `dL/dθ` (flat layout) for one sample into `grad`, given `dL/dlogits`.
fn backward(params: &NetworkParams, cfg: &NetworkConfig, cache: &ForwardCache, dlogits: &[f64], grad: &mut [f64]) {
    let d = params.first.width();
    let width = cfg.feature_width();

    // offsets into the flat layout
    let mut offsets = Vec::with_capacity(params.hidden.len());
    let mut at = 4 * d;
    for l in &params.hidden {
        offsets.push(at);
        at += l.weight.len() + l.bias.len();
    }
    let cls_at = at;

    let cls = &params.classifier;
    let mut dpooled = vec![0.0; width];
    for (i, &f) in cache.pooled.iter().enumerate() {
        for (o, &g) in dlogits.iter().enumerate() {
            grad[cls_at + i * cls.outputs + o] += f * g;
            dpooled[i] += cls.weight[i * cls.outputs + o] * g;
        }
    }
    for (o, &g) in dlogits.iter().enumerate() {
        grad[cls_at + cls.weight.len() + o] += g;
    }

    // route each pooled feature back to its winning point
    let mut routed: Vec<(usize, Vec<f64>)> = Vec::new();
    for c in 0..width {
        if dpooled[c] == 0.0 {
            continue;
        }
        let g = cache.global_argmax[c];
        let p = cache.group_argmax[g * width + c];
        let slot = match routed.iter().position(|(q, _)| *q == p) {
            Some(s) => s,
            None => {
                routed.push((p, vec![0.0; width]));
                routed.len() - 1
            }
        };
        routed[slot].1[c] += dpooled[c];
    }
    routed.sort_by_key(|(p, _)| *p);

    let mut dfirst_w = vec![[0.0; 3]; d];
    for (p, dout) in routed {
        let mut delta = dout;
        for li in (0..params.hidden.len()).rev() {
            let layer = &params.hidden[li];
            let z = &cache.pre[li + 1][p * layer.outputs..(p + 1) * layer.outputs];
            for (dv, &zv) in delta.iter_mut().zip(z) {
                if zv <= 0.0 {
                    *dv = 0.0;
                }
            }
            let prev = &cache.pre[li][p * layer.inputs..(p + 1) * layer.inputs];
            let base = offsets[li];
            let mut dprev = vec![0.0; layer.inputs];
            for i in 0..layer.inputs {
                let a = prev[i].max(0.0);
                let row = &layer.weight[i * layer.outputs..(i + 1) * layer.outputs];
                let grow = &mut grad[base + i * layer.outputs..base + (i + 1) * layer.outputs];
                let mut acc = 0.0;
                for ((gw, &w), &dv) in grow.iter_mut().zip(row).zip(&delta) {
                    *gw += a * dv;
                    acc += w * dv;
                }
                dprev[i] = acc;
            }
            let bias_at = base + layer.weight.len();
            for (o, &dv) in delta.iter().enumerate() {
                grad[bias_at + o] += dv;
            }
            delta = dprev;
        }
        let z1 = &cache.pre[0][p * d..(p + 1) * d];
        let x = cache.inputs[p];
        for k in 0..d {
            if z1[k] <= 0.0 {
                continue;
            }
            let dv = delta[k];
            for a in 0..3 {
                dfirst_w[k][a] += dv * x[a];
            }
            grad[3 * d + k] += dv;
        }
    }
    // w̃_k = w_k − w̄: remove the mean over k
    let mut mean = [0.0; 3];
    for g in &dfirst_w {
        mean = linalg3::add(&mean, g);
    }
    let mean = linalg3::scale(&mean, 1.0 / d as f64);
    for (k, g) in dfirst_w.iter().enumerate() {
        for a in 0..3 {
            grad[3 * k + a] += g[a] - mean[a];
        }
    }
}

/// Softmax cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + m - logits[label];
    let mut d: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    d[label] -= 1.0;
    (loss, d)
}

/// Index of the largest logit; ties go to the smaller class.
pub fn predict(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    best
}

/// One training example: a prepared cloud, its label and its loss weight.
#[derive(Clone, Copy, Debug)]
pub struct WeightedExample<'a> {
    pub cloud: &'a PreparedCloud,
    pub label: usize,
    pub weight: f64,
}

/// Mean loss and flat gradient over a batch of clouds, each weighted 1.
pub fn loss_and_grad(
    params: &NetworkParams,
    batch: &[(&PointCloud, usize)],
    cfg: &NetworkConfig,
) -> Result<(f64, Vec<f64>)> {
    let prepared = batch
        .iter()
        .map(|(c, _)| prepare(c, cfg))
        .collect::<Result<Vec<_>>>()?;
    let examples: Vec<WeightedExample> = prepared
        .iter()
        .zip(batch)
        .map(|(p, &(_, label))| WeightedExample {
            cloud: p,
            label,
            weight: 1.0,
        })
        .collect();
    let wf = params.weight_frame(cfg)?;
    loss_and_grad_prepared(params, &examples, cfg, &wf).map(|(l, g, _)| (l, g))
}

/// `Σ_s weight_s · CE_s / batch_len` and its gradient with the given frame
/// held fixed. Also returns the forward caches (for accuracy bookkeeping).
pub fn loss_and_grad_prepared(
    params: &NetworkParams,
    batch: &[WeightedExample],
    cfg: &NetworkConfig,
    wf: &WeightFrame,
) -> Result<(f64, Vec<f64>, Vec<ForwardCache>)> {
    if batch.is_empty() {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; params.num_params()];
    let mut loss = 0.0;
    let mut caches = Vec::with_capacity(batch.len());
    for ex in batch {
        if ex.label >= cfg.num_classes {
            return Err(Error::BadIndex {
                index: ex.label,
                len: cfg.num_classes,
            });
        }
        let (logits, cache) = forward_prepared(params, ex.cloud, cfg, wf)?;
        let (l, mut dlogits) = cross_entropy(&logits, ex.label);
        loss += ex.weight * scale * l;
        for v in dlogits.iter_mut() {
            *v *= ex.weight * scale;
        }
        backward(params, cfg, &cache, &dlogits, &mut grad);
        caches.push(cache);
    }
    Ok((loss, grad, caches))
}

/// Loss only, with a fixed frame; the reference for finite differences.
pub fn loss_prepared(
    params: &NetworkParams,
    batch: &[WeightedExample],
    cfg: &NetworkConfig,
    wf: &WeightFrame,
) -> Result<(f64, Vec<ForwardCache>)> {
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut caches = Vec::with_capacity(batch.len());
    for ex in batch {
        let (logits, cache) = forward_prepared(params, ex.cloud, cfg, wf)?;
        loss += ex.weight * scale * cross_entropy(&logits, ex.label).0;
        caches.push(cache);
    }
    Ok((loss, caches))
}

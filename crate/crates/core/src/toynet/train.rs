//! Adam training loop and rotated evaluation.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{loss_and_grad_prepared, predict, prepare, forward_prepared, NetworkConfig, NetworkParams, WeightedExample};
use crate::error::{Error, Result};
use crate::geometry::{apply_rigid, Seed};
use crate::synthdata::{random_rotation, LabeledDataset, RotationMode};

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Rotation applied to every training cloud, freshly drawn each epoch.
    pub augmentation: RotationMode,
    /// Evaluate the test set every this many epochs (0: after the last only).
    pub eval_every: usize,
    pub eval_seed: Seed,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 1e-3,
            batch_size: 16,
            augmentation: RotationMode::ZOnly,
            eval_every: 0,
            eval_seed: Seed(1234),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy_z: Option<f64>,
    pub test_accuracy_arbitrary: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub final_test_accuracy_z: Option<f64>,
    pub final_test_accuracy_arbitrary: Option<f64>,
    /// Not serialized and ignored by equality, so reports stay reproducible.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.epochs == other.epochs
            && self.final_test_accuracy_z == other.final_test_accuracy_z
            && self.final_test_accuracy_arbitrary == other.final_test_accuracy_arbitrary
    }
}

/// Trains from [`NetworkParams::init`]. The weight frame is recomputed from
/// the current first layer before every step.
pub fn train(
    cfg: &NetworkConfig,
    train_set: &LabeledDataset,
    test_set: Option<&LabeledDataset>,
    opts: &TrainOptions,
) -> Result<(NetworkParams, TrainReport)> {
    let started = Instant::now();
    if train_set.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    if opts.batch_size == 0 {
        return Err(Error::BadCount {
            what: "batch size",
            count: 0,
            min: 1,
            max: usize::MAX,
        });
    }
    if !(opts.lr > 0.0) || !opts.lr.is_finite() {
        return Err(Error::InvalidConfig(format!("learning rate must be positive, got {}", opts.lr)));
    }
    if let Some(s) = train_set.samples.iter().find(|s| s.label >= cfg.num_classes) {
        return Err(Error::BadIndex {
            index: s.label,
            len: cfg.num_classes,
        });
    }
    let mut params = NetworkParams::init(cfg)?;
    let mut theta = params.flatten();
    let mut adam = Adam::new(theta.len(), opts.lr);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle_rng = cfg.seed.derive(1).rng();
    let augment_seed = cfg.seed.derive(2);
    let mut epochs = Vec::with_capacity(opts.epochs);

    for epoch in 0..opts.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(opts.batch_size) {
            let prepared = chunk
                .iter()
                .map(|&i| {
                    let s = &train_set.samples[i];
                    let r = random_rotation(augment_seed.derive((epoch * train_set.len() + i) as u64), opts.augmentation);
                    prepare(&apply_rigid(&s.cloud, &r, &[0.0; 3]), cfg)
                })
                .collect::<Result<Vec<_>>>()?;
            let batch: Vec<WeightedExample> = prepared
                .iter()
                .zip(chunk)
                .map(|(p, &i)| WeightedExample {
                    cloud: p,
                    label: train_set.samples[i].label,
                    weight: 1.0,
                })
                .collect();
            let wf = params.weight_frame(cfg)?;
            let (loss, grad, caches) = loss_and_grad_prepared(&params, &batch, cfg, &wf)?;
            loss_sum += loss * chunk.len() as f64;
            correct += caches
                .iter()
                .zip(&batch)
                .filter(|(c, ex)| predict(&c.logits) == ex.label)
                .count();
            adam.step(&mut theta, &grad);
            params = params.with_flat(&theta)?;
        }
        let last = epoch + 1 == opts.epochs;
        let due = last || (opts.eval_every > 0 && (epoch + 1) % opts.eval_every == 0);
        let (z, ar) = match test_set {
            Some(t) if due => (
                Some(evaluate(&params, cfg, t, RotationMode::ZOnly, opts.eval_seed)?),
                Some(evaluate(&params, cfg, t, RotationMode::Arbitrary, opts.eval_seed)?),
            ),
            _ => (None, None),
        };
        epochs.push(EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            test_accuracy_z: z,
            test_accuracy_arbitrary: ar,
        });
    }
    let (final_z, final_ar) = match epochs.last() {
        Some(e) => (e.test_accuracy_z, e.test_accuracy_arbitrary),
        None => match test_set {
            Some(t) => (
                Some(evaluate(&params, cfg, t, RotationMode::ZOnly, opts.eval_seed)?),
                Some(evaluate(&params, cfg, t, RotationMode::Arbitrary, opts.eval_seed)?),
            ),
            None => (None, None),
        },
    };
    Ok((
        params,
        TrainReport {
            epochs,
            final_test_accuracy_z: final_z,
            final_test_accuracy_arbitrary: final_ar,
            wall_clock: started.elapsed(),
        },
    ))
}

/// Fraction of samples classified correctly after rotating sample `i` by a
/// rotation drawn from `seed.derive(i)`.
pub fn evaluate(
    params: &NetworkParams,
    cfg: &NetworkConfig,
    dataset: &LabeledDataset,
    mode: RotationMode,
    seed: Seed,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("evaluation set is empty".into()));
    }
    let wf = params.weight_frame(cfg)?;
    let mut correct = 0usize;
    for (i, s) in dataset.samples.iter().enumerate() {
        let r = random_rotation(seed.derive(i as u64), mode);
        let prepared = prepare(&apply_rigid(&s.cloud, &r, &[0.0; 3]), cfg)?;
        let (logits, _) = forward_prepared(params, &prepared, cfg, &wf)?;
        if predict(&logits) == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

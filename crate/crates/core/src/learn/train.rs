use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{softmax_unchecked, LinearModel, Standardizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AdamConfig {
    /// 80 epochs, batches of 10, learning rate 2e-4.
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.0002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 80,
            batch_size: 10,
            seed: 0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("adam betas must lie in [0, 1)"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::invalid("adam epsilon must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(())
    }
}

/// First/second moment state for a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, len: usize) -> Self {
        Adam {
            cfg,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * grad[i];
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= c.learning_rate * mhat / (vhat.sqrt() + c.epsilon);
        }
    }
}

/// Mean cross-entropy against target distributions and its gradient with
/// respect to `[weights..., bias...]`. Inputs are already standardized.
pub fn loss_and_gradient(model: &LinearModel, batch: &[(Vec<f64>, Vec<f64>)]) -> (f64, Vec<f64>) {
    let (c, d) = (model.num_classes, model.dim);
    let mut grad = vec![0.0; c * d + c];
    let mut loss = 0.0;
    let scale = 1.0 / batch.len().max(1) as f64;
    for (x, target) in batch {
        let logits = model.logits_standardized(x);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        let probs = softmax_unchecked(&logits);
        for k in 0..c {
            if target[k] > 0.0 {
                loss -= target[k] * (logits[k] - log_z);
            }
            let dz = (probs[k] - target[k]) * scale;
            for j in 0..d {
                grad[k * d + j] += dz * x[j];
            }
            grad[c * d + k] += dz;
        }
    }
    (loss * scale, grad)
}

pub fn one_hot(class: usize, num_classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; num_classes];
    v[class] = 1.0;
    v
}

fn param_mut(m: &mut LinearModel, i: usize) -> &mut f64 {
    let n = m.weights.len();
    if i < n {
        &mut m.weights[i]
    } else {
        &mut m.bias[i - n]
    }
}

/// Largest relative disagreement between the analytic gradient and central
/// differences with `h = 1e-5`. Entries where both sides are below `1e-8`
/// are compared absolutely.
pub fn gradient_check(model: &LinearModel, batch: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    const H: f64 = 1e-5;
    let (_, analytic) = loss_and_gradient(model, batch);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *param_mut(&mut probe, i);
        *param_mut(&mut probe, i) = orig + H;
        let plus = loss_and_gradient(&probe, batch).0;
        *param_mut(&mut probe, i) = orig - H;
        let minus = loss_and_gradient(&probe, batch).0;
        *param_mut(&mut probe, i) = orig;
        let numeric = (plus - minus) / (2.0 * H);
        let denom = a.abs().max(numeric.abs());
        let err = if denom < 1e-8 {
            (a - numeric).abs()
        } else {
            (a - numeric).abs() / denom
        };
        worst = worst.max(err);
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub n_train: usize,
    pub n_val: usize,
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were kept; 0 means the initialization.
    pub best_epoch: usize,
}

fn accuracy(model: &LinearModel, rows: &[(Vec<f64>, usize)]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let hits = rows
        .iter()
        .filter(|(x, y)| {
            let logits = model.logits_standardized(x);
            let mut best = 0;
            for k in 1..logits.len() {
                if logits[k] > logits[best] {
                    best = k;
                }
            }
            best == *y
        })
        .count();
    hits as f64 / rows.len() as f64
}

/// Stratified split: from each class, `floor(count * val_fraction)` samples
/// (after a seeded shuffle) go to validation.
fn split_indices(
    labels: &[usize],
    num_classes: usize,
    val_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in 0..num_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        let n_val = (idx.len() as f64 * val_fraction).floor() as usize;
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Trains a softmax-linear model with Adam over seeded mini-batches and
/// keeps the parameters from the earliest epoch with the best validation
/// accuracy. Inputs are standardized with statistics from the training
/// split, which travel with the model.
pub fn train(
    samples: &[(Vec<f64>, usize)],
    num_classes: usize,
    cfg: &AdamConfig,
    val_fraction: f64,
) -> Result<(LinearModel, TrainingLog)> {
    cfg.validate()?;
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::invalid("validation fraction must lie in [0, 1)"));
    }
    let dim = samples
        .first()
        .map(|(x, _)| x.len())
        .ok_or_else(|| Error::invalid("no training samples"))?;
    let mut model = LinearModel::zeros(num_classes, dim)?;
    for (i, (x, y)) in samples.iter().enumerate() {
        if x.len() != dim {
            return Err(Error::Shape(format!(
                "sample {i} has dimension {}, expected {dim}",
                x.len()
            )));
        }
        if *y >= num_classes {
            return Err(Error::invalid(format!(
                "sample {i} has class {y} but num_classes = {num_classes}"
            )));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i * dim + j));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels: Vec<usize> = samples.iter().map(|(_, y)| *y).collect();
    let (train_idx, val_idx) = split_indices(&labels, num_classes, val_fraction, &mut rng);
    for class in 0..num_classes {
        if !train_idx.iter().any(|&i| labels[i] == class) {
            return Err(Error::invalid(format!("class {class} has no training samples")));
        }
    }

    model.standardizer = Standardizer::fit(train_idx.iter().map(|&i| samples[i].0.as_slice()), dim);
    let prep = |idx: &[usize]| -> Vec<(Vec<f64>, usize)> {
        idx.iter()
            .map(|&i| (model.standardizer.apply(&samples[i].0), samples[i].1))
            .collect()
    };
    let train_rows = prep(&train_idx);
    let val_rows = prep(&val_idx);

    let mut params = vec![0.0; num_classes * dim + num_classes];
    let mut adam = Adam::new(*cfg, params.len());
    let mut order: Vec<usize> = (0..train_rows.len()).collect();
    let mut log = TrainingLog {
        n_train: train_rows.len(),
        n_val: val_rows.len(),
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
    };
    let mut best: Option<(f64, LinearModel)> = None;

    let all_targets: Vec<(Vec<f64>, Vec<f64>)> = train_rows
        .iter()
        .map(|(x, y)| (x.clone(), one_hot(*y, num_classes)))
        .collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(Vec<f64>, Vec<f64>)> = chunk.iter().map(|&i| all_targets[i].clone()).collect();
            let (_, grad) = loss_and_gradient(&model, &batch);
            adam.step(&mut params, &grad);
            let (w, b) = params.split_at(num_classes * dim);
            model.weights.copy_from_slice(w);
            model.bias.copy_from_slice(b);
        }
        let (train_loss, _) = loss_and_gradient(&model, &all_targets);
        let train_accuracy = accuracy(&model, &train_rows);
        let val_accuracy = (!val_rows.is_empty()).then(|| accuracy(&model, &val_rows));
        log.epochs.push(EpochLog {
            epoch,
            train_loss,
            train_accuracy,
            val_accuracy,
        });
        let score = val_accuracy.unwrap_or(f64::NEG_INFINITY);
        if val_accuracy.is_none() || best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, model.clone()));
            log.best_epoch = epoch;
        }
    }

    let model = best.map_or(model, |(_, m)| m);
    Ok((model, log))
}

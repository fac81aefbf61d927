use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities (or raw scores) over classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Self {
        ScoreVector { scores }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Index of the largest score; the lowest class id wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate().skip(1) {
            if s > self.scores[best] {
                best = i;
            }
        }
        best
    }
}

pub fn softmax(logits: &[f64]) -> Result<ScoreVector> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(ScoreVector::new(softmax_unchecked(logits)))
}

pub(crate) fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Per-dimension affine standardization fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Zero-variance dimensions store 1.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Self {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in &rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Softmax-linear classifier over standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub num_classes: usize,
    pub dim: usize,
    /// Row-major `[num_classes x dim]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub standardizer: Standardizer,
}

impl LinearModel {
    pub fn zeros(num_classes: usize, dim: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid("need at least 2 classes"));
        }
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        Ok(LinearModel {
            num_classes,
            dim,
            weights: vec![0.0; num_classes * dim],
            bias: vec![0.0; num_classes],
            standardizer: Standardizer::identity(dim),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.dim == 0 {
            return Err(Error::invalid("model needs >= 2 classes and dimension >= 1"));
        }
        if self.weights.len() != self.num_classes * self.dim
            || self.bias.len() != self.num_classes
            || self.standardizer.mean.len() != self.dim
            || self.standardizer.std.len() != self.dim
        {
            return Err(Error::Shape("model parameter shapes are inconsistent".into()));
        }
        let all = self
            .weights
            .iter()
            .chain(&self.bias)
            .chain(&self.standardizer.mean)
            .chain(&self.standardizer.std);
        if let Some(i) = all.clone().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(())
    }

    /// Logits for an already standardized input.
    pub(crate) fn logits_standardized(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.dim)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    pub fn predict(&self, feature: &[f64]) -> Result<ScoreVector> {
        if feature.len() != self.dim {
            return Err(Error::Shape(format!(
                "feature has dimension {}, model expects {}",
                feature.len(),
                self.dim
            )));
        }
        softmax(&self.logits_standardized(&self.standardizer.apply(feature)))
    }
}

pub fn predict(model: &LinearModel, feature: &[f64]) -> Result<ScoreVector> {
    model.predict(feature)
}

//! Softmax-linear per-stream classifiers trained with Adam.

mod model;
mod train;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use model::{predict, softmax, LinearModel, ScoreVector, Standardizer};
pub use train::{gradient_check, loss_and_gradient, one_hot, train, Adam, AdamConfig, EpochLog, TrainingLog};

use crate::error::{Error, Result};
use crate::tensorio::{read_tensor, write_tensor, Tensor};

pub const WEIGHTS_FILE: &str = "weights.rpt";
pub const BIAS_FILE: &str = "bias.rpt";
pub const SIDECAR_FILE: &str = "model.json";

/// JSON stored beside the weight tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub num_classes: usize,
    pub dim: usize,
    pub standardizer: Standardizer,
    pub config: AdamConfig,
    pub seed: u64,
    /// Caller-defined settings, e.g. how features were extracted.
    #[serde(default)]
    pub extra: serde_json::Value,
}

/// Writes `weights.rpt`, `bias.rpt` and `model.json` into `dir`.
///
/// Weights are stored as 32-bit floats, so a reloaded model matches the
/// in-memory one only to single precision.
pub fn save_model(
    model: &LinearModel,
    cfg: &AdamConfig,
    extra: serde_json::Value,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_tensor(
        &Tensor::from_f64(vec![model.num_classes, model.dim], &model.weights)?,
        dir.join(WEIGHTS_FILE),
    )?;
    write_tensor(
        &Tensor::from_f64(vec![model.num_classes], &model.bias)?,
        dir.join(BIAS_FILE),
    )?;
    let sidecar = ModelSidecar {
        num_classes: model.num_classes,
        dim: model.dim,
        standardizer: model.standardizer.clone(),
        config: *cfg,
        seed: cfg.seed,
        extra,
    };
    fs::write(dir.join(SIDECAR_FILE), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<(LinearModel, ModelSidecar)> {
    let dir = dir.as_ref();
    let sidecar: ModelSidecar = serde_json::from_slice(&fs::read(dir.join(SIDECAR_FILE))?)?;
    let w = read_tensor(dir.join(WEIGHTS_FILE))?;
    let b = read_tensor(dir.join(BIAS_FILE))?;
    if w.dims() != [sidecar.num_classes, sidecar.dim] || b.dims() != [sidecar.num_classes] {
        return Err(Error::Shape(format!(
            "weight dims {:?} / bias dims {:?} disagree with sidecar ({} classes, dim {})",
            w.dims(),
            b.dims(),
            sidecar.num_classes,
            sidecar.dim
        )));
    }
    let model = LinearModel {
        num_classes: sidecar.num_classes,
        dim: sidecar.dim,
        weights: w.data().iter().map(|&v| f64::from(v)).collect(),
        bias: b.data().iter().map(|&v| f64::from(v)).collect(),
        standardizer: sidecar.standardizer.clone(),
    };
    model.validate()?;
    Ok((model, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = LinearModel::zeros(3, 2).unwrap();
        m.weights = vec![0.5, -0.25, 1.0, 2.0, -3.0, 0.125];
        m.bias = vec![0.1, 0.2, 0.3];
        m.standardizer = Standardizer {
            mean: vec![0.1234567890123, -5.0],
            std: vec![2.0, 0.3333333333333333],
        };
        let cfg = AdamConfig::default();
        save_model(&m, &cfg, serde_json::json!({"stream": "motion"}), dir.path()).unwrap();
        let (back, side) = load_model(dir.path()).unwrap();
        assert_eq!(back.standardizer, m.standardizer);
        assert_eq!(side.extra["stream"], "motion");
        for (a, b) in back
            .weights
            .iter()
            .chain(&back.bias)
            .zip(m.weights.iter().chain(&m.bias))
        {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn load_rejects_inconsistent_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let m = LinearModel::zeros(2, 2).unwrap();
        save_model(&m, &AdamConfig::default(), serde_json::Value::Null, dir.path()).unwrap();
        write_tensor(&Tensor::new(vec![3], vec![0.0; 3]).unwrap(), dir.path().join(BIAS_FILE)).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::Shape(_))));
    }
}

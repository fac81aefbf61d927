//! Stream feature extraction and the train/predict/fuse/evaluate loop.
//!
//! The motion stream describes the RGB video by its dynamic image; the
//! STD stream describes the depth video by its ROI'd key-frame silhouettes.
//! Both are shrunk and flattened into vectors for the linear classifiers.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion_eval::{evaluate, make_splits, Evaluation, FusionMode, SplitProtocol};
use crate::imgproc::resize_bilinear;
use crate::keyframe::{extract_keyframes, KeyframeConfig};
use crate::learn::{train, AdamConfig, LinearModel, ScoreVector, TrainingLog};
use crate::rankpool::dynamic_image;
use crate::synthgen::{generate, load_entry, ManifestEntry, SynthConfig};
use crate::tensorio::VideoSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Motion,
    Std,
}

impl Stream {
    pub const ALL: [Stream; 2] = [Stream::Motion, Stream::Std];

    pub fn name(self) -> &'static str {
        match self {
            Stream::Motion => "motion",
            Stream::Std => "std",
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stream {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "motion" => Ok(Stream::Motion),
            "std" => Ok(Stream::Std),
            other => Err(Error::invalid(format!("unknown stream {other:?}"))),
        }
    }
}

/// How per-key-frame vectors become one STD feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyframePooling {
    #[default]
    Mean,
    /// Key frames in temporal order; dropped frames leave zero blocks.
    Concatenate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Side the dynamic image is resized to before flattening.
    pub motion_side: usize,
    /// Key-frame settings; `keyframes.side` is the flattened ROI side.
    pub keyframes: KeyframeConfig,
    pub pooling: KeyframePooling,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            motion_side: 8,
            keyframes: KeyframeConfig {
                side: 32,
                ..KeyframeConfig::default()
            },
            pooling: KeyframePooling::Mean,
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self, stream: Stream, channels: usize) -> usize {
        match stream {
            Stream::Motion => self.motion_side * self.motion_side * channels,
            Stream::Std => {
                let one = self.keyframes.side * self.keyframes.side;
                match self.pooling {
                    KeyframePooling::Mean => one,
                    KeyframePooling::Concatenate => one * self.keyframes.k,
                }
            }
        }
    }
}

/// Raw dynamic image of the video, resized and flattened channel by channel.
pub fn motion_feature(rgb: &VideoSequence, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    let di = dynamic_image(rgb)?;
    Ok(resize_bilinear(&di.raw, cfg.motion_side, cfg.motion_side)?.into_data())
}

/// Pooled ROI silhouettes of the depth video's key frames.
pub fn std_feature(depth: &VideoSequence, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    let (_, _, stack) = extract_keyframes(depth, &cfg.keyframes)?;
    let one = cfg.keyframes.side * cfg.keyframes.side;
    match cfg.pooling {
        KeyframePooling::Mean => {
            let mut out = vec![0.0; one];
            for f in &stack.frames {
                for (o, v) in out.iter_mut().zip(f.data()) {
                    *o += v;
                }
            }
            let n = stack.frames.len() as f64;
            Ok(out.into_iter().map(|v| v / n).collect())
        }
        KeyframePooling::Concatenate => {
            let mut kept: Vec<(usize, &[f64])> = stack
                .kept
                .iter()
                .copied()
                .zip(stack.frames.iter().map(|f| f.data()))
                .collect();
            kept.sort_by_key(|k| k.0);
            let mut out = vec![0.0; one * cfg.keyframes.k];
            for (slot, (_, data)) in kept.iter().enumerate().take(cfg.keyframes.k) {
                out[slot * one..(slot + 1) * one].copy_from_slice(data);
            }
            Ok(out)
        }
    }
}

pub fn stream_feature(
    stream: Stream,
    rgb: &VideoSequence,
    depth: &VideoSequence,
    cfg: &FeatureConfig,
) -> Result<Vec<f64>> {
    match stream {
        Stream::Motion => motion_feature(rgb, cfg),
        Stream::Std => std_feature(depth, cfg),
    }
}

/// Loads each manifest entry from disk and extracts one stream's feature.
pub fn manifest_features(
    manifest_dir: &Path,
    entries: &[&ManifestEntry],
    stream: Stream,
    cfg: &FeatureConfig,
) -> Result<Vec<Vec<f64>>> {
    entries
        .par_iter()
        .map(|e| {
            let (rgb, depth) = load_entry(manifest_dir, e)?;
            stream_feature(stream, &rgb, &depth, cfg)
        })
        .collect()
}

/// Scores every sample with a trained model.
pub fn predict_all(model: &LinearModel, features: &[Vec<f64>]) -> Result<Vec<ScoreVector>> {
    features.iter().map(|f| model.predict(f)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    pub protocol: SplitProtocol,
    pub features: FeatureConfig,
    pub adam: AdamConfig,
    pub val_fraction: f64,
    pub modes: Vec<FusionMode>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            synth: SynthConfig::default(),
            protocol: SplitProtocol::CrossView {
                train_views: [1, 2].into(),
                test_views: [3].into(),
            },
            features: FeatureConfig::default(),
            adam: AdamConfig::default(),
            val_fraction: 0.2,
            modes: FusionMode::ALL.to_vec(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults with one seed driving both corpus generation and training.
    pub fn seeded(seed: u64) -> Self {
        let mut cfg = ExperimentConfig::default();
        cfg.synth.seed = seed;
        cfg.adam.seed = seed;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub logs: Vec<(Stream, TrainingLog)>,
    pub evaluation: Evaluation,
}

/// Synthesizes a corpus, trains both streams on the training side of the
/// protocol and evaluates them and their fusions on the test side.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let corpus = generate(&cfg.synth)?;
    let metadata: Vec<_> = corpus.samples.iter().map(|s| (s.id.clone(), s.meta())).collect();
    let (train_ids, test_ids) = make_splits(&metadata, &cfg.protocol)?;
    let pick = |ids: &[String]| -> Vec<usize> {
        ids.iter()
            .map(|id| {
                corpus
                    .samples
                    .iter()
                    .position(|s| &s.id == id)
                    .expect("split ids come from the corpus")
            })
            .collect()
    };
    let (train_idx, test_idx) = (pick(&train_ids), pick(&test_ids));
    let labels = |idx: &[usize]| -> Vec<usize> {
        idx.iter()
            .map(|&i| corpus.samples[i].meta().class_id as usize)
            .collect()
    };
    let test_labels = labels(&test_idx);

    let mut streams = Vec::new();
    let mut logs = Vec::new();
    for stream in Stream::ALL {
        let features = corpus
            .samples
            .par_iter()
            .map(|s| stream_feature(stream, &s.rgb, &s.depth, &cfg.features))
            .collect::<Result<Vec<_>>>()?;
        let samples: Vec<(Vec<f64>, usize)> = train_idx
            .iter()
            .zip(labels(&train_idx))
            .map(|(&i, l)| (features[i].clone(), l))
            .collect();
        let (model, log) = train(&samples, cfg.synth.num_classes, &cfg.adam, cfg.val_fraction)?;
        let test_features: Vec<Vec<f64>> = test_idx.iter().map(|&i| features[i].clone()).collect();
        streams.push((stream.name().to_string(), predict_all(&model, &test_features)?));
        logs.push((stream, log));
    }
    let evaluation = evaluate(&streams, &test_labels, &cfg.modes)?;
    Ok(ExperimentOutcome {
        train_ids,
        test_ids,
        logs,
        evaluation,
    })
}

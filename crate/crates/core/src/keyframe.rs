//! Key-frame selection from structural similarity of consecutive frames.
//!
//! Each consecutive pair `(f_i, f_{i+1})` gets a similarity index. Pairs are
//! ranked ascending (least similar first) and the first `k` pair indices
//! become key frames, returned in temporal order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::{largest_component, roi_resize, silhouette, ssim, SilhouetteConfig, SsimParams};
use crate::tensorio::{Frame, Tensor, VideoSequence};

pub const DEFAULT_KEYFRAMES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsiiEntry {
    /// 1-based index `i` of the pair `(f_i, f_{i+1})`.
    pub pair_index: usize,
    pub ssii: f64,
}

/// Pair similarities sorted ascending by value, then by pair index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsiiVector {
    pub entries: Vec<SsiiEntry>,
}

impl SsiiVector {
    /// Sorts raw per-pair values; `values[i]` belongs to pair `i + 1`.
    pub fn from_pair_values(values: &[f64]) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let mut entries: Vec<SsiiEntry> = values
            .iter()
            .enumerate()
            .map(|(i, &ssii)| SsiiEntry {
                pair_index: i + 1,
                ssii,
            })
            .collect();
        entries.sort_by(|a, b| a.ssii.total_cmp(&b.ssii).then(a.pair_index.cmp(&b.pair_index)));
        Ok(SsiiVector { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Values in pair order, i.e. before ranking.
    pub fn by_pair(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.entries.len()];
        for e in &self.entries {
            out[e.pair_index - 1] = e.ssii;
        }
        out
    }
}

/// Which frame of a pair `(i, i+1)` stands for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PairFrame {
    #[default]
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyframeSelection {
    /// Strictly increasing, 1-based.
    pub frame_indices: Vec<usize>,
    pub k_requested: usize,
}

pub fn ssii_vector(video: &VideoSequence, p: &SsimParams) -> Result<SsiiVector> {
    ssii_vector_of(video.frames(), p)
}

pub fn ssii_vector_of(frames: &[Frame], p: &SsimParams) -> Result<SsiiVector> {
    if frames.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 frames for pair similarity, got {}",
            frames.len()
        )));
    }
    let values = frames
        .par_windows(2)
        .map(|w| ssim(&w[0], &w[1], p).map(|r| r.global_index))
        .collect::<Result<Vec<f64>>>()?;
    SsiiVector::from_pair_values(&values)
}

/// Walks the ranked pairs and picks up to `k` distinct frames. When the
/// video has too few pairs, the frame not covered by any pair index (the
/// last frame, or the first under [`PairFrame::Second`]) fills in.
pub fn select_from_ssii(ssii: &SsiiVector, k: usize, rule: PairFrame) -> Result<KeyframeSelection> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let n = ssii.len() + 1;
    let mut chosen: Vec<usize> = Vec::with_capacity(k.min(n));
    for e in &ssii.entries {
        if chosen.len() == k {
            break;
        }
        let frame = match rule {
            PairFrame::First => e.pair_index,
            PairFrame::Second => e.pair_index + 1,
        };
        if !chosen.contains(&frame) {
            chosen.push(frame);
        }
    }
    if chosen.len() < k {
        let backfill = match rule {
            PairFrame::First => n,
            PairFrame::Second => 1,
        };
        if !chosen.contains(&backfill) {
            chosen.push(backfill);
        }
    }
    chosen.sort_unstable();
    Ok(KeyframeSelection {
        frame_indices: chosen,
        k_requested: k,
    })
}

pub fn select_keyframes(video: &VideoSequence, k: usize, p: &SsimParams, rule: PairFrame) -> Result<KeyframeSelection> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    select_from_ssii(&ssii_vector(video, p)?, k, rule)
}

/// Cleaned, cropped depth frame: silhouette, largest blob, background
/// zeroed, square crop resized to `side`.
pub fn roi_frame(depth: &Frame, side: usize, cfg: &SilhouetteConfig) -> Result<Frame> {
    let mask = largest_component(&silhouette(depth, cfg)?)?;
    let masked: Vec<f64> = depth.data().iter().zip(mask.data()).map(|(v, m)| v * m).collect();
    let masked = Frame::new(depth.height(), depth.width(), 1, masked)?;
    roi_resize(&masked, &mask, side)
}

/// Applies [`roi_frame`] to every frame; frames without foreground become
/// all-zero so pair similarities stay defined.
pub fn roi_video(video: &VideoSequence, side: usize, cfg: &SilhouetteConfig) -> Result<VideoSequence> {
    let frames = video
        .frames()
        .par_iter()
        .map(|f| match roi_frame(f, side, cfg) {
            Err(Error::EmptyRegion(_)) => Frame::zeros(side, side, 1),
            other => other,
        })
        .collect::<Result<Vec<_>>>()?;
    VideoSequence::new(frames, video.meta)
}

/// Which frames the pair similarities are measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SsiiInput {
    /// The depth frames as given.
    Raw,
    /// ROI-cropped silhouettes.
    #[default]
    Silhouette,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeConfig {
    pub k: usize,
    pub ssim: SsimParams,
    pub pair_frame: PairFrame,
    pub input: SsiiInput,
    pub side: usize,
    pub silhouette: SilhouetteConfig,
}

impl Default for KeyframeConfig {
    fn default() -> Self {
        KeyframeConfig {
            k: DEFAULT_KEYFRAMES,
            ssim: SsimParams::default(),
            pair_frame: PairFrame::First,
            input: SsiiInput::Silhouette,
            side: crate::imgproc::DEFAULT_ROI_SIDE,
            silhouette: SilhouetteConfig::default(),
        }
    }
}

/// ROI'd key frames ready for an external feature extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeStack {
    pub frames: Vec<Frame>,
    /// 1-based indices of the frames that made it into the stack.
    pub kept: Vec<usize>,
    /// Selected frames dropped for lack of foreground, with the reason.
    pub dropped: Vec<(usize, String)>,
}

impl KeyframeStack {
    pub fn warning_count(&self) -> usize {
        self.dropped.len()
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::from_frames(&self.frames)
    }
}

pub fn keyframe_stack(
    video: &VideoSequence,
    selection: &KeyframeSelection,
    side: usize,
    cfg: &SilhouetteConfig,
) -> Result<KeyframeStack> {
    let n = video.len();
    if let Some(&bad) = selection.frame_indices.iter().find(|&&i| i == 0 || i > n) {
        return Err(Error::invalid(format!("selected frame {bad} is outside 1..={n}")));
    }
    if video.frame_shape().is_some_and(|(_, _, c)| c != 1) {
        return Err(Error::ChannelMismatch {
            expected: 1,
            actual: video.frame_shape().map_or(0, |s| s.2),
        });
    }
    let mut stack = KeyframeStack {
        frames: Vec::new(),
        kept: Vec::new(),
        dropped: Vec::new(),
    };
    for &i in &selection.frame_indices {
        match roi_frame(&video.frames()[i - 1], side, cfg) {
            Ok(f) => {
                stack.frames.push(f);
                stack.kept.push(i);
            }
            Err(Error::EmptyRegion(msg)) => {
                log::warn!("key frame {i} dropped: {msg}");
                stack.dropped.push((i, msg));
            }
            Err(e) => return Err(e),
        }
    }
    if stack.frames.is_empty() {
        return Err(Error::EmptyRegion(
            "no selected key frame has a usable silhouette".into(),
        ));
    }
    Ok(stack)
}

/// Full key-frame pass: optional ROI preprocessing, ranking, selection and
/// the exported stack.
pub fn extract_keyframes(
    video: &VideoSequence,
    cfg: &KeyframeConfig,
) -> Result<(SsiiVector, KeyframeSelection, KeyframeStack)> {
    let ssii = match cfg.input {
        SsiiInput::Raw => ssii_vector(video, &cfg.ssim)?,
        SsiiInput::Silhouette => ssii_vector(&roi_video(video, cfg.side, &cfg.silhouette)?, &cfg.ssim)?,
    };
    let selection = select_from_ssii(&ssii, cfg.k, cfg.pair_frame)?;
    let stack = keyframe_stack(video, &selection, cfg.side, &cfg.silhouette)?;
    Ok((ssii, selection, stack))
}

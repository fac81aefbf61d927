use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A planar, channel-major image of real intensities.
///
/// Element `(c, y, x)` lives at `c * height * width + y * width + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("frame must be non-empty, got {height}x{width}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!("frame channels must be 1 or 3, got {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Frame {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Frame::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Frame::filled(height, width, channels, 0.0)
    }

    /// Builds a single-channel frame from a row-major closure.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Frame::new(height, width, 1, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Returns channel `c` as a single-channel frame.
    pub fn channel(&self, c: usize) -> Frame {
        Frame {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.plane(c).to_vec(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub(crate) fn from_parts_unchecked(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Frame {
        debug_assert_eq!(data.len(), height * width * channels);
        Frame {
            height,
            width,
            channels,
            data,
        }
    }
}

/// Class, subject and view ids attached to a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub class_id: u32,
    pub subject_id: u32,
    pub view_id: u32,
}

/// Temporally ordered frames of uniform shape.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    frames: Vec<Frame>,
    pub meta: SequenceMeta,
    pub fps_hint: Option<f64>,
}

impl VideoSequence {
    pub fn new(frames: Vec<Frame>, meta: SequenceMeta) -> Result<Self> {
        if let Some(first) = frames.first() {
            let shape = first.shape();
            if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.shape() != shape) {
                return Err(Error::Shape(format!(
                    "frame {} has shape {:?}, expected {:?}",
                    i + 1,
                    f.shape(),
                    shape
                )));
            }
        }
        Ok(VideoSequence {
            frames,
            meta,
            fps_hint: None,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_shape(&self) -> Option<(usize, usize, usize)> {
        self.frames.first().map(Frame::shape)
    }
}

/// Ordered per-frame feature vectors of uniform dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    vectors: Vec<Vec<f64>>,
    pub meta: SequenceMeta,
}

impl FeatureSequence {
    pub fn new(vectors: Vec<Vec<f64>>, meta: SequenceMeta) -> Result<Self> {
        if let Some(first) = vectors.first() {
            let d = first.len();
            if d == 0 {
                return Err(Error::Shape("feature dimension must be at least 1".into()));
            }
            for (t, v) in vectors.iter().enumerate() {
                if v.len() != d {
                    return Err(Error::Shape(format!(
                        "feature vector {} has dimension {}, expected {d}",
                        t + 1,
                        v.len()
                    )));
                }
                if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(t * d + i));
                }
            }
        }
        Ok(FeatureSequence { vectors, meta })
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn reversed(&self) -> FeatureSequence {
        FeatureSequence {
            vectors: self.vectors.iter().rev().cloned().collect(),
            meta: self.meta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Frame::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Frame::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Frame::new(0, 2, 1, vec![]).is_err());
        assert!(matches!(
            Frame::new(1, 2, 1, vec![0.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn planar_indexing() {
        let f = Frame::new(1, 2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(f.get(0, 0, 1), 2.0);
        assert_eq!(f.get(2, 0, 0), 5.0);
        assert_eq!(f.channel(1).data(), &[3.0, 4.0]);
    }

    #[test]
    fn video_requires_uniform_shape() {
        let a = Frame::zeros(2, 2, 1).unwrap();
        let b = Frame::zeros(3, 2, 1).unwrap();
        assert!(VideoSequence::new(vec![a.clone(), b], SequenceMeta::default()).is_err());
        assert_eq!(
            VideoSequence::new(vec![a.clone(), a], SequenceMeta::default())
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn feature_sequence_checks_dims() {
        assert!(FeatureSequence::new(vec![vec![1.0], vec![1.0, 2.0]], SequenceMeta::default()).is_err());
        assert!(FeatureSequence::new(vec![vec![]], SequenceMeta::default()).is_err());
        let s = FeatureSequence::new(vec![vec![1.0, 2.0]; 3], SequenceMeta::default()).unwrap();
        assert_eq!((s.len(), s.dim()), (3, 2));
    }
}

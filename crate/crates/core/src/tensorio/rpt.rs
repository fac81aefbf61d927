//! `RPT1` tensor files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "RPT1" | u32 rank | u32 dims[rank] | f32 payload[prod(dims)] | [u32 len | len bytes of UTF-8 JSON]
//! ```
//!
//! The trailing metadata block is optional. Payload order is row-major over
//! `dims`.

use std::fs;
use std::path::Path;

use super::frame::{FeatureSequence, Frame, SequenceMeta};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
    /// Raw JSON text, kept verbatim.
    metadata: Option<String>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Shape("tensor rank must be at least 1".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Shape(format!("tensor dims must be positive, got {dims:?}")));
        }
        let expected = dims.iter().product::<usize>();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "payload has {} values but dims {dims:?} need {expected}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Tensor {
            dims,
            data,
            metadata: None,
        })
    }

    pub fn from_f64(dims: Vec<usize>, data: &[f64]) -> Result<Self> {
        Tensor::new(dims, data.iter().map(|&v| v as f32).collect())
    }

    /// Attaches a metadata block. The text must be valid JSON.
    pub fn with_metadata(mut self, json: impl Into<String>) -> Result<Self> {
        let json = json.into();
        serde_json::from_str::<serde_json::Value>(&json)?;
        self.metadata = Some(json);
        Ok(self)
    }

    pub fn with_sequence_meta(self, meta: &SequenceMeta) -> Result<Self> {
        let json = serde_json::to_string(meta)?;
        self.with_metadata(json)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn metadata(&self) -> Option<&str> {
        self.metadata.as_deref()
    }

    /// Class/subject/view ids from the metadata block, if it carries them.
    pub fn sequence_meta(&self) -> Option<SequenceMeta> {
        self.metadata
            .as_deref()
            .and_then(|m| serde_json::from_str::<SequenceMeta>(m).ok())
    }

    /// Interprets a rank-2 tensor `[n, d]` as `n` feature vectors.
    pub fn to_feature_sequence(&self) -> Result<FeatureSequence> {
        let [n, d] = self.dims[..] else {
            return Err(Error::Shape(format!(
                "feature sequence needs rank 2, got dims {:?}",
                self.dims
            )));
        };
        let vectors = (0..n)
            .map(|t| self.data[t * d..(t + 1) * d].iter().map(|&v| f64::from(v)).collect())
            .collect();
        FeatureSequence::new(vectors, self.sequence_meta().unwrap_or_default())
    }

    pub fn from_feature_sequence(seq: &FeatureSequence) -> Result<Self> {
        let flat: Vec<f64> = seq.vectors().iter().flatten().copied().collect();
        Tensor::from_f64(vec![seq.len(), seq.dim()], &flat)?.with_sequence_meta(&seq.meta)
    }

    /// Interprets `[n, h, w]` or `[n, c, h, w]` as a stack of frames.
    pub fn to_frames(&self) -> Result<Vec<Frame>> {
        let (n, c, h, w) = match self.dims[..] {
            [n, h, w] => (n, 1, h, w),
            [n, c, h, w] => (n, c, h, w),
            _ => {
                return Err(Error::Shape(format!(
                    "frame stack needs rank 3 or 4, got dims {:?}",
                    self.dims
                )))
            }
        };
        let per = c * h * w;
        (0..n)
            .map(|i| {
                let data = self.data[i * per..(i + 1) * per]
                    .iter()
                    .map(|&v| f64::from(v))
                    .collect();
                Frame::new(h, w, c, data)
            })
            .collect()
    }

    /// Stacks frames as `[n, h, w]` (single channel) or `[n, c, h, w]`.
    pub fn from_frames(frames: &[Frame]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Shape("cannot build a tensor from zero frames".into()))?;
        let (h, w, c) = first.shape();
        if let Some(f) = frames.iter().find(|f| f.shape() != (h, w, c)) {
            return Err(Error::Shape(format!(
                "frame shape {:?} differs from {:?}",
                f.shape(),
                (h, w, c)
            )));
        }
        let dims = if c == 1 {
            vec![frames.len(), h, w]
        } else {
            vec![frames.len(), c, h, w]
        };
        let flat: Vec<f64> = frames.iter().flat_map(|f| f.data().iter().copied()).collect();
        Tensor::from_f64(dims, &flat)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta_len = self.metadata.as_ref().map_or(0, |m| 4 + m.len());
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + 4 * self.data.len() + meta_len);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(m) = &self.metadata {
            out.extend_from_slice(&(m.len() as u32).to_le_bytes());
            out.extend_from_slice(m.as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic, expected RPT1".into()));
        }
        let mut pos = 4;
        let read_u32 = |pos: &mut usize, what: &str| -> Result<u32> {
            let chunk = bytes
                .get(*pos..*pos + 4)
                .ok_or_else(|| Error::parse(*pos, format!("truncated {what}")))?;
            *pos += 4;
            Ok(u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
        };
        let rank = read_u32(&mut pos, "rank")? as usize;
        if rank == 0 {
            return Err(Error::Shape("tensor rank must be at least 1".into()));
        }
        let mut dims = Vec::with_capacity(rank.min(16));
        for _ in 0..rank {
            dims.push(read_u32(&mut pos, "dims")? as usize);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Shape(format!("dims {dims:?} overflow")))?;
        let payload_len = count
            .checked_mul(4)
            .filter(|&n| pos + n <= bytes.len())
            .ok_or_else(|| {
                Error::Shape(format!(
                    "dims {dims:?} need {count} values but only {} payload bytes remain",
                    bytes.len() - pos
                ))
            })?;
        let data: Vec<f32> = bytes[pos..pos + payload_len]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        pos += payload_len;

        let mut tensor = Tensor::new(dims, data)?;
        if pos < bytes.len() {
            let len = read_u32(&mut pos, "metadata length")? as usize;
            let text = bytes
                .get(pos..pos + len)
                .ok_or_else(|| Error::parse(pos, "truncated metadata block"))?;
            if pos + len != bytes.len() {
                return Err(Error::parse(pos + len, "trailing bytes after metadata block"));
            }
            let text =
                std::str::from_utf8(text).map_err(|e| Error::parse(pos + e.valid_up_to(), "metadata is not UTF-8"))?;
            tensor = tensor.with_metadata(text)?;
        }
        Ok(tensor)
    }
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    Tensor::from_bytes(&fs::read(path)?)
}

pub fn write_tensor(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, tensor.to_bytes())?;
    Ok(())
}

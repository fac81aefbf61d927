use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::{FeatureSequence, Frame, VideoSequence};

/// Per-frame weights of approximate rank pooling for a video of length `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArpCoefficients {
    pub n: usize,
    pub gamma: Vec<f64>,
}

/// `gamma[t] = sum_{i=t..=n} (2i - n - 1) / i`, built as a suffix sum.
pub fn arp_coefficients(n: usize) -> Result<ArpCoefficients> {
    if n == 0 {
        return Err(Error::invalid("video length must be at least 1"));
    }
    let nf = n as f64;
    let mut gamma = vec![0.0; n];
    let mut acc = 0.0;
    for i in (1..=n).rev() {
        let fi = i as f64;
        acc += (2.0 * fi - nf - 1.0) / fi;
        gamma[i - 1] = acc;
    }
    Ok(ArpCoefficients { n, gamma })
}

/// `sum_t gamma_t * phi_t`.
pub fn dynamic_feature(seq: &FeatureSequence) -> Result<Vec<f64>> {
    if seq.is_empty() {
        return Err(Error::invalid("feature sequence is empty"));
    }
    let coeffs = arp_coefficients(seq.len())?;
    let mut out = vec![0.0; seq.dim()];
    for (g, phi) in coeffs.gamma.iter().zip(seq.vectors()) {
        for (o, v) in out.iter_mut().zip(phi) {
            *o += g * v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicImage {
    /// Weighted frame sum, same shape as the input frames.
    pub raw: Frame,
    /// `raw` min-max normalized per channel to `[0, 1]`; flat channels map to 0.5.
    pub display: Frame,
}

pub fn dynamic_image(video: &VideoSequence) -> Result<DynamicImage> {
    let (h, w, c) = video
        .frame_shape()
        .ok_or_else(|| Error::invalid("cannot pool an empty video"))?;
    let coeffs = arp_coefficients(video.len())?;
    let mut raw = vec![0.0; h * w * c];
    for (g, frame) in coeffs.gamma.iter().zip(video.frames()) {
        for (o, v) in raw.iter_mut().zip(frame.data()) {
            *o += g * v;
        }
    }
    let display = normalize_channels(&raw, h * w);
    Ok(DynamicImage {
        raw: Frame::new(h, w, c, raw)?,
        display: Frame::new(h, w, c, display)?,
    })
}

fn normalize_channels(raw: &[f64], plane: usize) -> Vec<f64> {
    raw.chunks(plane)
        .flat_map(|ch| {
            let (lo, hi) = ch.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
            let span = hi - lo;
            ch.iter().map(move |&v| {
                if span > 0.0 {
                    ((v - lo) / span).clamp(0.0, 1.0)
                } else {
                    0.5
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorio::SequenceMeta;

    /// Direct double loop over the per-frame weights.
    fn oracle(n: usize) -> Vec<f64> {
        (1..=n)
            .map(|t| (t..=n).map(|i| (2.0 * i as f64 - n as f64 - 1.0) / i as f64).sum())
            .collect()
    }

    #[test]
    fn small_lengths() {
        assert_eq!(arp_coefficients(1).unwrap().gamma, vec![0.0]);
        assert_eq!(arp_coefficients(2).unwrap().gamma, vec![-0.5, 0.5]);
        let g4 = arp_coefficients(4).unwrap().gamma;
        let expected = oracle(4);
        for (a, b) in g4.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((g4[0] + 2.416_666_666_666_667).abs() < 1e-12);
        assert!((g4[1] - 0.583_333_333_333_333).abs() < 1e-12);
        assert!((g4[2] - 1.083_333_333_333_333).abs() < 1e-12);
        assert!((g4[3] - 0.75).abs() < 1e-15);
        assert!(arp_coefficients(0).is_err());
    }

    #[test]
    fn last_weight_and_zero_sum() {
        for n in 1..60 {
            let g = arp_coefficients(n).unwrap().gamma;
            assert!((g[n - 1] - (n as f64 - 1.0) / n as f64).abs() < 1e-9);
            assert!(g.iter().sum::<f64>().abs() < 1e-6 * n as f64);
        }
    }

    fn seq(vs: Vec<Vec<f64>>) -> FeatureSequence {
        FeatureSequence::new(vs, SequenceMeta::default()).unwrap()
    }

    #[test]
    fn linear_ramp_feature() {
        // sum_t gamma_t * t for n = 4, straight from the oracle weights
        let expected: f64 = oracle(4).iter().enumerate().map(|(i, g)| g * (i + 1) as f64).sum();
        assert!((expected - 5.0).abs() < 1e-12);
        let u = [0.6, 0.8];
        let s = seq((1..=4).map(|t| vec![t as f64 * u[0], t as f64 * u[1]]).collect());
        let df = dynamic_feature(&s).unwrap();
        assert!((df[0] - expected * u[0]).abs() < 1e-12);
        assert!((df[1] - expected * u[1]).abs() < 1e-12);
    }

    #[test]
    fn constant_and_single_frame_give_zero() {
        let df = dynamic_feature(&seq(vec![vec![3.0, -1.0]; 7])).unwrap();
        assert!(df.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(dynamic_feature(&seq(vec![vec![3.0, -1.0]])).unwrap(), vec![0.0, 0.0]);
        assert!(dynamic_feature(&seq(vec![])).is_err());
    }

    fn vid(frames: Vec<Frame>) -> VideoSequence {
        VideoSequence::new(frames, SequenceMeta::default()).unwrap()
    }

    #[test]
    fn two_frame_dark_to_bright() {
        let di = dynamic_image(&vid(vec![
            Frame::zeros(3, 2, 3).unwrap(),
            Frame::filled(3, 2, 3, 1.0).unwrap(),
        ]))
        .unwrap();
        assert_eq!(di.raw.shape(), (3, 2, 3));
        assert!(di.raw.data().iter().all(|&v| v == 0.5));
        assert!(di.display.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn constant_video_is_zero() {
        let di = dynamic_image(&vid(vec![Frame::filled(4, 4, 1, 0.3).unwrap(); 9])).unwrap();
        assert!(di.raw.data().iter().all(|v| v.abs() < 1e-12));
        assert!(dynamic_image(&vid(vec![])).is_err());
    }

    #[test]
    fn display_is_per_channel_min_max() {
        let f1 = Frame::new(1, 2, 3, vec![0.0, 1.0, 0.2, 0.2, 1.0, 0.0]).unwrap();
        let f2 = Frame::zeros(1, 2, 3).unwrap();
        let di = dynamic_image(&vid(vec![f1, f2])).unwrap();
        assert_eq!(di.display.data(), &[1.0, 0.0, 0.5, 0.5, 0.0, 1.0]);
    }

    #[test]
    fn linear_in_frames() {
        let mk = |s: u64| -> VideoSequence {
            let mut st = s | 1;
            vid((0..5)
                .map(|_| {
                    Frame::from_fn(3, 3, |_, _| {
                        st = st.wrapping_mul(6364136223846793005).wrapping_add(1);
                        (st >> 40) as f64 / (1u64 << 24) as f64
                    })
                    .unwrap()
                })
                .collect())
        };
        let (v1, v2) = (mk(3), mk(8));
        let (a, b) = (0.7, -1.3);
        let mixed = vid(v1
            .frames()
            .iter()
            .zip(v2.frames())
            .map(|(x, y)| {
                Frame::new(
                    3,
                    3,
                    1,
                    x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect(),
                )
                .unwrap()
            })
            .collect());
        let d1 = dynamic_image(&v1).unwrap().raw;
        let d2 = dynamic_image(&v2).unwrap().raw;
        let dm = dynamic_image(&mixed).unwrap().raw;
        for i in 0..9 {
            assert!((dm.data()[i] - (a * d1.data()[i] + b * d2.data()[i])).abs() < 1e-12);
        }
    }
}

use crate::error::{Error, Result};
use crate::tensorio::Frame;

use super::morph::check_binary;

pub const DEFAULT_ROI_SIDE: usize = 227;

/// Source coordinate for output index `i` under corner-aligned sampling.
fn source_coord(i: usize, out_len: usize, in_len: usize) -> f64 {
    if out_len == 1 || in_len == 1 {
        (in_len as f64 - 1.0) / 2.0
    } else {
        i as f64 * (in_len - 1) as f64 / (out_len - 1) as f64
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    (a + (b - a) * t).clamp(a.min(b), a.max(b))
}

/// Corner-aligned bilinear resampling, per channel.
pub fn resize_bilinear(f: &Frame, out_h: usize, out_w: usize) -> Result<Frame> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Shape("resize target must be non-empty".into()));
    }
    let (h, w, c) = f.shape();
    let mut data = Vec::with_capacity(out_h * out_w * c);
    for ch in 0..c {
        for oy in 0..out_h {
            let sy = source_coord(oy, out_h, h);
            let y0 = (sy.floor() as usize).min(h - 1);
            let y1 = (y0 + 1).min(h - 1);
            let ty = sy - y0 as f64;
            for ox in 0..out_w {
                let sx = source_coord(ox, out_w, w);
                let x0 = (sx.floor() as usize).min(w - 1);
                let x1 = (x0 + 1).min(w - 1);
                let tx = sx - x0 as f64;
                let top = lerp(f.get(ch, y0, x0), f.get(ch, y0, x1), tx);
                let bottom = lerp(f.get(ch, y1, x0), f.get(ch, y1, x1), tx);
                data.push(lerp(top, bottom, ty));
            }
        }
    }
    Frame::new(out_h, out_w, c, data)
}

/// Inclusive bounding box `(top, left, bottom, right)` of a binary mask.
pub fn bounding_box(mask: &Frame) -> Result<(usize, usize, usize, usize)> {
    check_binary(mask)?;
    let (h, w) = (mask.height(), mask.width());
    let mut bb: Option<(usize, usize, usize, usize)> = None;
    for y in 0..h {
        for x in 0..w {
            if mask.get(0, y, x) != 0.0 {
                bb = Some(match bb {
                    None => (y, x, y, x),
                    Some((t, l, b, r)) => (t.min(y), l.min(x), b.max(y), r.max(x)),
                });
            }
        }
    }
    bb.ok_or_else(|| Error::EmptyRegion("mask has no foreground pixels".into()))
}

/// Crops `f` to the mask's bounding box, zero-pads the short axis to a
/// centered square (odd remainders go to the bottom/right), then resizes to
/// `side x side`.
pub fn roi_resize(f: &Frame, mask: &Frame, side: usize) -> Result<Frame> {
    if mask.height() != f.height() || mask.width() != f.width() {
        return Err(Error::Shape(format!(
            "mask {}x{} does not match frame {}x{}",
            mask.height(),
            mask.width(),
            f.height(),
            f.width()
        )));
    }
    let (top, left, bottom, right) = bounding_box(mask)?;
    let (ch, cw) = (bottom - top + 1, right - left + 1);
    let sq = ch.max(cw);
    let (pad_y, pad_x) = ((sq - ch) / 2, (sq - cw) / 2);
    let c = f.channels();
    let mut data = vec![0.0; sq * sq * c];
    for k in 0..c {
        for y in 0..ch {
            for x in 0..cw {
                data[(k * sq + y + pad_y) * sq + x + pad_x] = f.get(k, top + y, left + x);
            }
        }
    }
    let square = Frame::new(sq, sq, c, data)?;
    if sq == side {
        return Ok(square);
    }
    resize_bilinear(&square, side, side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_mask_same_side_is_identity() {
        let f = Frame::from_fn(6, 6, |y, x| (y * 6 + x) as f64 / 36.0).unwrap();
        let m = Frame::filled(6, 6, 1, 1.0).unwrap();
        assert_eq!(roi_resize(&f, &m, 6).unwrap(), f);
        assert_eq!(resize_bilinear(&f, 6, 6).unwrap(), f);
    }

    #[test]
    fn upsample_checkerboard_keeps_corners() {
        let f = Frame::new(2, 2, 1, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let g = resize_bilinear(&f, 4, 4).unwrap();
        assert_eq!(g.get(0, 0, 0), 0.0);
        assert_eq!(g.get(0, 0, 3), 1.0);
        assert_eq!(g.get(0, 3, 0), 1.0);
        assert_eq!(g.get(0, 3, 3), 0.0);
        // (1,1) samples source (1/3, 1/3): 0*(4/9) + 1*(2/9) + 1*(2/9) + 0*(1/9)
        assert!((g.get(0, 1, 1) - 4.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn crop_and_pad() {
        // 2x4 foreground block becomes a 4x4 square with one zero row above and below
        let f = Frame::from_fn(8, 8, |y, x| {
            if (3..5).contains(&y) && (2..6).contains(&x) {
                0.5
            } else {
                0.9
            }
        })
        .unwrap();
        let m = Frame::from_fn(8, 8, |y, x| {
            if (3..5).contains(&y) && (2..6).contains(&x) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let out = roi_resize(&f, &m, 4).unwrap();
        let expected = Frame::from_fn(4, 4, |y, _| if (1..3).contains(&y) { 0.5 } else { 0.0 }).unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn empty_mask_errors() {
        let f = Frame::zeros(4, 4, 1).unwrap();
        assert!(matches!(roi_resize(&f, &f, 4), Err(Error::EmptyRegion(_))));
    }

    proptest! {
        #[test]
        fn constants_preserved(v in 0.0f64..1.0, h in 1usize..9, w in 1usize..9, oh in 1usize..20, ow in 1usize..20) {
            let f = Frame::filled(h, w, 1, v).unwrap();
            let g = resize_bilinear(&f, oh, ow).unwrap();
            prop_assert!(g.data().iter().all(|&x| x == v));
        }

        #[test]
        fn stays_within_range(data in prop::collection::vec(0.0f64..1.0, 12), oh in 1usize..15, ow in 1usize..15) {
            let f = Frame::new(3, 4, 1, data).unwrap();
            let (lo, hi) = f.min_max();
            let g = resize_bilinear(&f, oh, ow).unwrap();
            prop_assert!(g.data().iter().all(|&x| x >= lo && x <= hi));
        }
    }
}

//! Structural similarity with separately weighted luminance, contrast and
//! structure terms.
//!
//! Local statistics use a normalized Gaussian window and are evaluated only
//! where the window fits inside the image, so the local map is
//! `(h - 2r) x (w - 2r)` for window radius `r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    /// Luminance exponent.
    pub alpha: f64,
    /// Contrast exponent.
    pub beta: f64,
    /// Structure exponent.
    pub gamma_exp: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub window_radius: usize,
    pub window_sigma: f64,
}

impl Default for SsimParams {
    /// Depth-video defaults: `alpha = beta = 0.5`, `gamma = 1`, and the
    /// usual stabilizers for dynamic range 1 with an 11x11, sigma 1.5 window.
    fn default() -> Self {
        let k2 = 0.03 * 0.03;
        SsimParams {
            alpha: 0.5,
            beta: 0.5,
            gamma_exp: 1.0,
            k1: 0.01 * 0.01,
            k2,
            k3: k2 / 2.0,
            window_radius: 5,
            window_sigma: 1.5,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        let exps = [self.alpha, self.beta, self.gamma_exp];
        if exps.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::invalid("ssim exponents must be finite and non-negative"));
        }
        if [self.k1, self.k2, self.k3].iter().any(|k| !k.is_finite() || *k <= 0.0) {
            return Err(Error::invalid("ssim constants k1, k2, k3 must be positive"));
        }
        if self.window_radius == 0 {
            return Err(Error::invalid("ssim window radius must be at least 1"));
        }
        if !(self.window_sigma > 0.0 && self.window_sigma.is_finite()) {
            return Err(Error::invalid("ssim window sigma must be positive"));
        }
        Ok(())
    }

    pub fn window_side(&self) -> usize {
        2 * self.window_radius + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsimResult {
    pub global_index: f64,
    pub local_map: Frame,
}

fn gaussian_kernel(radius: usize, sigma: f64) -> Vec<f64> {
    let r = radius as f64;
    let raw: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Separable "valid" filtering of a row-major `h x w` plane.
fn filter_valid(src: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let ow = w + 1 - k;
    let oh = h + 1 - k;
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = kernel.iter().zip(&line[x..x + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel.iter().enumerate().map(|(j, a)| a * rows[(y + j) * ow + x]).sum();
        }
    }
    out
}

/// `sign(v) * |v|^e`, which equals `v^e` whenever the latter is real.
fn signed_pow(v: f64, e: f64) -> f64 {
    if e == 1.0 {
        v
    } else {
        v.signum() * v.abs().powf(e)
    }
}

pub fn ssim(f1: &Frame, f2: &Frame, p: &SsimParams) -> Result<SsimResult> {
    p.validate()?;
    if f1.channels() != 1 || f2.channels() != 1 {
        return Err(Error::ChannelMismatch {
            expected: 1,
            actual: f1.channels().max(f2.channels()),
        });
    }
    if f1.shape() != f2.shape() {
        return Err(Error::Shape(format!(
            "ssim inputs differ: {:?} vs {:?}",
            f1.shape(),
            f2.shape()
        )));
    }
    let (h, w, _) = f1.shape();
    let side = p.window_side();
    if h < side || w < side {
        return Err(Error::Shape(format!(
            "{h}x{w} image is smaller than the {side}x{side} ssim window"
        )));
    }

    let kernel = gaussian_kernel(p.window_radius, p.window_sigma);
    let x = f1.data();
    let y = f2.data();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let mu_x = filter_valid(x, h, w, &kernel);
    let mu_y = filter_valid(y, h, w, &kernel);
    let e_xx = filter_valid(&xx, h, w, &kernel);
    let e_yy = filter_valid(&yy, h, w, &kernel);
    let e_xy = filter_valid(&xy, h, w, &kernel);

    let local: Vec<f64> = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = (e_xx[i] - mx * mx).max(0.0);
            let var_y = (e_yy[i] - my * my).max(0.0);
            let cov = e_xy[i] - mx * my;
            let (sx, sy) = (var_x.sqrt(), var_y.sqrt());

            let lum = (2.0 * mx * my + p.k1) / (mx * mx + my * my + p.k1);
            let con = (2.0 * sx * sy + p.k2) / (var_x + var_y + p.k2);
            let st = (cov + p.k3) / (sx * sy + p.k3);
            signed_pow(lum, p.alpha) * signed_pow(con, p.beta) * signed_pow(st, p.gamma_exp)
        })
        .collect();

    let global_index = local.iter().sum::<f64>() / local.len() as f64;
    let local_map = Frame::new(h + 1 - side, w + 1 - side, 1, local)?;
    Ok(SsimResult {
        global_index,
        local_map,
    })
}

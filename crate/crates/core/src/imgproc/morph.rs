//! Binary morphology on zero-padded single-channel masks.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::Frame;

/// Square, odd-sided boolean structuring element, anchored at its center.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuringElement {
    side: usize,
    mask: Vec<bool>,
}

impl StructuringElement {
    pub fn new(side: usize, mask: Vec<bool>) -> Result<Self> {
        if !matches!(side, 3 | 5 | 7) {
            return Err(Error::invalid(format!(
                "structuring element side must be 3, 5 or 7, got {side}"
            )));
        }
        if mask.len() != side * side {
            return Err(Error::Shape(format!(
                "structuring element mask must have {} cells",
                side * side
            )));
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::invalid("structuring element has no active cell"));
        }
        Ok(StructuringElement { side, mask })
    }

    pub fn square(side: usize) -> Result<Self> {
        StructuringElement::new(side, vec![true; side * side])
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Active offsets `(dy, dx)` relative to the anchor.
    fn offsets(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        let r = (self.side / 2) as isize;
        self.mask.iter().enumerate().filter(|(_, &on)| on).map(move |(i, _)| {
            let (y, x) = (i / self.side, i % self.side);
            (y as isize - r, x as isize - r)
        })
    }
}

impl Default for StructuringElement {
    fn default() -> Self {
        StructuringElement {
            side: 3,
            mask: vec![true; 9],
        }
    }
}

pub fn check_binary(f: &Frame) -> Result<()> {
    if f.channels() != 1 {
        return Err(Error::ChannelMismatch {
            expected: 1,
            actual: f.channels(),
        });
    }
    match f.data().iter().position(|&v| v != 0.0 && v != 1.0) {
        Some(i) => Err(Error::invalid(format!("mask is not binary at element {i}"))),
        None => Ok(()),
    }
}

fn at(f: &Frame, y: isize, x: isize) -> bool {
    y >= 0 && x >= 0 && (y as usize) < f.height() && (x as usize) < f.width() && f.get(0, y as usize, x as usize) != 0.0
}

fn map_mask(f: &Frame, mut keep: impl FnMut(isize, isize) -> bool) -> Frame {
    let (h, w) = (f.height(), f.width());
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h as isize {
        for x in 0..w as isize {
            data.push(if keep(y, x) { 1.0 } else { 0.0 });
        }
    }
    Frame::from_parts_unchecked(h, w, 1, data)
}

pub fn erode(f: &Frame, se: &StructuringElement) -> Result<Frame> {
    check_binary(f)?;
    let offs: Vec<_> = se.offsets().collect();
    Ok(map_mask(f, |y, x| offs.iter().all(|&(dy, dx)| at(f, y + dy, x + dx))))
}

pub fn dilate(f: &Frame, se: &StructuringElement) -> Result<Frame> {
    check_binary(f)?;
    let offs: Vec<_> = se.offsets().collect();
    Ok(map_mask(f, |y, x| offs.iter().any(|&(dy, dx)| at(f, y - dy, x - dx))))
}

pub fn open(f: &Frame, se: &StructuringElement) -> Result<Frame> {
    dilate(&erode(f, se)?, se)
}

pub fn close(f: &Frame, se: &StructuringElement) -> Result<Frame> {
    erode(&dilate(f, se)?, se)
}

pub fn complement(f: &Frame) -> Result<Frame> {
    check_binary(f)?;
    let data = f.data().iter().map(|&v| 1.0 - v).collect();
    Ok(Frame::from_parts_unchecked(f.height(), f.width(), 1, data))
}

/// Foreground extraction recipe for depth frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteConfig {
    /// Pixels strictly above this intensity count as foreground.
    pub threshold: f64,
    pub element: StructuringElement,
}

impl Default for SilhouetteConfig {
    fn default() -> Self {
        SilhouetteConfig {
            threshold: 0.0,
            element: StructuringElement::default(),
        }
    }
}

/// Threshold, then open, then close.
pub fn silhouette(depth: &Frame, cfg: &SilhouetteConfig) -> Result<Frame> {
    if depth.channels() != 1 {
        return Err(Error::ChannelMismatch {
            expected: 1,
            actual: depth.channels(),
        });
    }
    let data = depth
        .data()
        .iter()
        .map(|&v| if v > cfg.threshold { 1.0 } else { 0.0 })
        .collect();
    let mask = Frame::from_parts_unchecked(depth.height(), depth.width(), 1, data);
    close(&open(&mask, &cfg.element)?, &cfg.element)
}

/// Keeps the 8-connected component with the most pixels. Ties go to the
/// component whose first pixel comes earliest in row-major order.
pub fn largest_component(mask: &Frame) -> Result<Frame> {
    check_binary(mask)?;
    let (h, w) = (mask.height(), mask.width());
    let fg = mask.data();
    let mut label = vec![usize::MAX; h * w];
    let mut best: Option<(usize, usize)> = None; // (label, size)
    let mut queue = VecDeque::new();
    let mut next = 0;

    for start in 0..h * w {
        if fg[start] == 0.0 || label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (y, x) = ((i / w) as isize, (i % w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (ny, nx) = (y + dy, x + dx);
                    if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if fg[j] != 0.0 && label[j] == usize::MAX {
                        label[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((next, size));
        }
        next += 1;
    }

    let (keep, _) = best.ok_or_else(|| Error::EmptyRegion("mask has no foreground pixels".into()))?;
    let data = label.iter().map(|&l| if l == keep { 1.0 } else { 0.0 }).collect();
    Ok(Frame::from_parts_unchecked(h, w, 1, data))
}

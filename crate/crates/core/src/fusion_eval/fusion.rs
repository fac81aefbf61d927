use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::ScoreVector;

const SIMPLEX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    Maximum,
    Average,
    Product,
}

impl FusionMode {
    pub const ALL: [FusionMode; 3] = [FusionMode::Maximum, FusionMode::Average, FusionMode::Product];

    pub fn name(self) -> &'static str {
        match self {
            FusionMode::Maximum => "maximum",
            FusionMode::Average => "average",
            FusionMode::Product => "product",
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" | "maximum" => Ok(FusionMode::Maximum),
            "avg" | "average" | "mean" => Ok(FusionMode::Average),
            "mul" | "prod" | "product" => Ok(FusionMode::Product),
            other => Err(Error::invalid(format!("unknown fusion mode {other:?}"))),
        }
    }
}

fn check_simplex(s: &ScoreVector, which: usize) -> Result<()> {
    if s.scores.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err(Error::invalid(format!(
            "stream {which} has a negative or non-finite score"
        )));
    }
    let sum: f64 = s.scores.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::invalid(format!("stream {which} scores sum to {sum}, not 1")));
    }
    Ok(())
}

fn renormalize(v: Vec<f64>) -> Vec<f64> {
    let sum: f64 = v.iter().sum();
    v.into_iter().map(|x| x / sum).collect()
}

/// Combines per-stream class probabilities and renormalizes to sum 1.
///
/// Products are accumulated as log sums so many small probabilities do not
/// underflow; if every class has a zero factor the result is uniform.
pub fn fuse(scores: &[ScoreVector], mode: FusionMode) -> Result<ScoreVector> {
    let first = scores.first().ok_or_else(|| Error::invalid("no streams to fuse"))?;
    let c = first.len();
    if c == 0 {
        return Err(Error::invalid("score vectors are empty"));
    }
    for (i, s) in scores.iter().enumerate() {
        if s.len() != c {
            return Err(Error::Shape(format!(
                "stream {i} has {} classes, stream 0 has {c}",
                s.len()
            )));
        }
        check_simplex(s, i)?;
    }
    let column = |k: usize| scores.iter().map(move |s| s.scores[k]);
    let fused = match mode {
        FusionMode::Maximum => renormalize((0..c).map(|k| column(k).fold(f64::NEG_INFINITY, f64::max)).collect()),
        FusionMode::Average => renormalize((0..c).map(|k| column(k).sum::<f64>() / scores.len() as f64).collect()),
        FusionMode::Product => {
            let logs: Vec<f64> = (0..c).map(|k| column(k).map(f64::ln).sum()).collect();
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                vec![1.0 / c as f64; c]
            } else {
                renormalize(logs.iter().map(|l| (l - max).exp()).collect())
            }
        }
    };
    Ok(ScoreVector::new(fused))
}

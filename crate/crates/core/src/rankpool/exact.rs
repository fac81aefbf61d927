//! Rank pooling by direct minimization of the pairwise hinge objective
//!
//! ```text
//! E(r) = lambda/2 |r|^2 + 2/(N(N-1)) * sum_{t2 > t1} max(0, 1 - <r, Q_t2> + <r, Q_t1>)
//! ```
//!
//! where `Q_t` is the running mean of the first `t` feature vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::FeatureSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAverage {
    pub q: Vec<Vec<f64>>,
}

impl TimeAverage {
    /// `<r, Q_t>` for every `t`.
    pub fn scores(&self, r: &[f64]) -> Vec<f64> {
        self.q.iter().map(|q| dot(r, q)).collect()
    }
}

pub fn time_average(seq: &FeatureSequence) -> TimeAverage {
    let mut sum = vec![0.0; seq.dim()];
    let q = seq
        .vectors()
        .iter()
        .enumerate()
        .map(|(i, phi)| {
            for (s, v) in sum.iter_mut().zip(phi) {
                *s += v;
            }
            let inv = 1.0 / (i + 1) as f64;
            sum.iter().map(|s| s * inv).collect()
        })
        .collect();
    TimeAverage { q }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankPoolConfig {
    pub lambda: f64,
    pub step: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for RankPoolConfig {
    fn default() -> Self {
        RankPoolConfig {
            lambda: 0.01,
            step: 0.1,
            max_iter: 10_000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankVector {
    pub r: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub final_objective: f64,
    /// `false` when `max_iter` ran out first.
    pub converged: bool,
}

/// Pairwise differences `Q_t2 - Q_t1` for every `t2 > t1`.
fn pair_differences(avg: &TimeAverage) -> Vec<Vec<f64>> {
    let n = avg.q.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for t1 in 0..n {
        for t2 in t1 + 1..n {
            out.push(avg.q[t2].iter().zip(&avg.q[t1]).map(|(a, b)| a - b).collect());
        }
    }
    out
}

struct Objective {
    diffs: Vec<Vec<f64>>,
    lambda: f64,
    pair_weight: f64,
}

impl Objective {
    fn value(&self, r: &[f64]) -> f64 {
        let hinge: f64 = self.diffs.iter().map(|d| (1.0 - dot(r, d)).max(0.0)).sum();
        0.5 * self.lambda * dot(r, r) + self.pair_weight * hinge
    }

    /// A subgradient; pairs sitting exactly on the margin contribute nothing.
    fn subgradient(&self, r: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = r.iter().map(|v| self.lambda * v).collect();
        for d in &self.diffs {
            if 1.0 - dot(r, d) > 0.0 {
                for (gi, di) in g.iter_mut().zip(d) {
                    *gi -= self.pair_weight * di;
                }
            }
        }
        g
    }
}

/// Full-batch subgradient descent from `r = 0`. A step that would raise the
/// objective is rejected and the step size halved; the run stops once an
/// accepted step improves the objective by less than `tol`.
pub fn exact_rank_pool(seq: &FeatureSequence, cfg: &RankPoolConfig) -> Result<RankVector> {
    let n = seq.len();
    if n < 2 {
        return Err(Error::invalid(format!("rank pooling needs at least 2 frames, got {n}")));
    }
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::invalid("lambda must be positive"));
    }
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return Err(Error::invalid("step must be positive"));
    }
    let obj = Objective {
        diffs: pair_differences(&time_average(seq)),
        lambda: cfg.lambda,
        pair_weight: 2.0 / (n * (n - 1)) as f64,
    };

    let mut r = vec![0.0; seq.dim()];
    let mut value = obj.value(&r);
    let mut step = cfg.step;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let g = obj.subgradient(&r);
        if g.iter().all(|&v| v == 0.0) {
            converged = true;
            break;
        }
        let candidate: Vec<f64> = r.iter().zip(&g).map(|(ri, gi)| ri - step * gi).collect();
        let next = obj.value(&candidate);
        if next <= value {
            let improvement = value - next;
            r = candidate;
            value = next;
            if improvement < cfg.tol {
                converged = true;
                break;
            }
        } else {
            step *= 0.5;
            if step < f64::EPSILON * cfg.step {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        log::debug!("rank pooling hit max_iter={} at objective {value}", cfg.max_iter);
    }
    Ok(RankVector {
        r,
        lambda: cfg.lambda,
        iterations,
        final_objective: value,
        converged,
    })
}

/// Negated objective gradient at `r = 0`: `sum_{t2 > t1} (Q_t2 - Q_t1)`.
pub fn arp_first_step(seq: &FeatureSequence) -> Result<Vec<f64>> {
    if seq.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 frames, got {}", seq.len())));
    }
    let avg = time_average(seq);
    let mut out = vec![0.0; seq.dim()];
    for d in pair_differences(&avg) {
        for (o, v) in out.iter_mut().zip(&d) {
            *o += v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rankpool::dynamic_feature;
    use crate::tensorio::SequenceMeta;

    fn seq(vs: Vec<Vec<f64>>) -> FeatureSequence {
        FeatureSequence::new(vs, SequenceMeta::default()).unwrap()
    }

    #[test]
    fn running_mean() {
        let avg = time_average(&seq(vec![vec![0.0], vec![1.0]]));
        assert_eq!(avg.q, vec![vec![0.0], vec![0.5]]);
        let avg = time_average(&seq(vec![vec![2.0, 4.0], vec![4.0, 0.0], vec![0.0, 2.0]]));
        assert_eq!(avg.q[2], vec![2.0, 2.0]);
        let avg = time_average(&seq(vec![vec![1.5]; 4]));
        assert!(avg.q.iter().all(|q| q == &vec![1.5]));
    }

    #[test]
    fn two_frame_analytic_minimum() {
        // E(r) = 0.005 r^2 + max(0, 1 - r/2): hinge vanishes at r = 2, E(2) = 0.02
        let rv = exact_rank_pool(&seq(vec![vec![0.0], vec![1.0]]), &RankPoolConfig::default()).unwrap();
        assert!(rv.converged);
        assert!((rv.r[0] - 2.0).abs() < 1e-3, "r = {}", rv.r[0]);
        assert!((rv.final_objective - 0.02).abs() < 1e-4);
    }

    #[test]
    fn huge_lambda_pins_r_to_zero() {
        let s = seq((0..5).map(|t| vec![t as f64, -(t as f64) * 0.5, 1.0]).collect());
        let cfg = RankPoolConfig {
            lambda: 1e6,
            ..RankPoolConfig::default()
        };
        let rv = exact_rank_pool(&s, &cfg).unwrap();
        assert!(rv.r.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-3);
    }

    #[test]
    fn reversal_flips_direction() {
        let fwd = seq(vec![vec![0.0], vec![1.0]]);
        let a = exact_rank_pool(&fwd, &RankPoolConfig::default()).unwrap();
        let b = exact_rank_pool(&fwd.reversed(), &RankPoolConfig::default()).unwrap();
        assert!(dot(&a.r, &b.r) < 0.0);
    }

    #[test]
    fn objective_never_increases() {
        let s = seq((0..6).map(|t| vec![(t as f64).sin(), (t as f64 * 0.7).cos()]).collect());
        let cfg = RankPoolConfig::default();
        let obj = Objective {
            diffs: pair_differences(&time_average(&s)),
            lambda: cfg.lambda,
            pair_weight: 2.0 / 30.0,
        };
        let mut last = obj.value(&[0.0, 0.0]);
        for iters in [1, 5, 20, 100, 1000] {
            let rv = exact_rank_pool(&s, &RankPoolConfig { max_iter: iters, ..cfg }).unwrap();
            assert!(rv.final_objective <= last + 1e-15);
            assert!((obj.value(&rv.r) - rv.final_objective).abs() < 1e-12);
            last = rv.final_objective;
        }
    }

    #[test]
    fn max_iter_exhaustion_is_flagged() {
        let cfg = RankPoolConfig {
            max_iter: 3,
            ..RankPoolConfig::default()
        };
        let rv = exact_rank_pool(&seq(vec![vec![0.0], vec![1.0]]), &cfg).unwrap();
        assert!(!rv.converged);
        assert_eq!(rv.iterations, 3);
    }

    #[test]
    fn input_validation() {
        assert!(exact_rank_pool(&seq(vec![vec![1.0]]), &RankPoolConfig::default()).is_err());
        let bad = RankPoolConfig {
            lambda: 0.0,
            ..RankPoolConfig::default()
        };
        assert!(exact_rank_pool(&seq(vec![vec![1.0], vec![2.0]]), &bad).is_err());
        assert!(arp_first_step(&seq(vec![vec![1.0]])).is_err());
    }

    #[test]
    fn first_step_two_frames() {
        let s = seq(vec![vec![0.0], vec![1.0]]);
        assert_eq!(arp_first_step(&s).unwrap(), vec![0.5]);
        assert_eq!(dynamic_feature(&s).unwrap(), vec![0.5]);
    }

    #[test]
    fn first_step_constant_is_zero() {
        let s = seq(vec![vec![0.3, -2.0]; 5]);
        assert!(arp_first_step(&s).unwrap().iter().all(|v| v.abs() < 1e-12));
        assert!(dynamic_feature(&s).unwrap().iter().all(|v| v.abs() < 1e-12));
    }
}

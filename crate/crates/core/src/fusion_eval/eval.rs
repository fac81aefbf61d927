use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fusion::{fuse, FusionMode};
use super::roc::{roc_auc, RocCurve};
use crate::error::{Error, Result};
use crate::learn::ScoreVector;

/// Metrics for one score table. Curves are kept out of the JSON form; they
/// go to CSV through [`Evaluation::roc_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    #[serde(skip)]
    pub per_class_roc: Vec<Option<RocCurve>>,
    /// `None` for a class with no positives or no negatives in the labels.
    pub per_class_auc: Vec<Option<f64>>,
    /// Mean over the classes whose AUC is defined.
    pub macro_auc: Option<f64>,
}

impl EvalReport {
    pub fn accuracy_from_confusion(&self) -> f64 {
        let total: usize = self.confusion.iter().flatten().sum();
        let diag: usize = (0..self.confusion.len()).map(|k| self.confusion[k][k]).sum();
        diag as f64 / total as f64
    }
}

fn check_table(scores: &[ScoreVector], labels: &[usize]) -> Result<usize> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} score rows but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let first = scores.first().ok_or_else(|| Error::invalid("no samples to evaluate"))?;
    let c = first.len();
    if c == 0 {
        return Err(Error::invalid("score vectors are empty"));
    }
    if let Some(i) = scores.iter().position(|s| s.len() != c) {
        return Err(Error::Shape(format!(
            "row {i} has {} classes, row 0 has {c}",
            scores[i].len()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::invalid(format!("label {l} out of range for {c} classes")));
    }
    Ok(c)
}

/// Accuracy, confusion matrix and one-vs-rest ROC for a single score table.
pub fn evaluate_scores(scores: &[ScoreVector], labels: &[usize]) -> Result<EvalReport> {
    let c = check_table(scores, labels)?;
    let mut confusion = vec![vec![0usize; c]; c];
    let mut correct = 0usize;
    for (s, &l) in scores.iter().zip(labels) {
        let p = s.argmax();
        confusion[l][p] += 1;
        correct += usize::from(p == l);
    }
    let curves: Vec<Option<(RocCurve, f64)>> = (0..c)
        .into_par_iter()
        .map(|k| {
            let bin: Vec<bool> = labels.iter().map(|&l| l == k).collect();
            let col: Vec<f64> = scores.iter().map(|s| s.scores[k]).collect();
            roc_auc(&bin, &col).ok()
        })
        .collect();
    let per_class_auc: Vec<Option<f64>> = curves.iter().map(|c| c.as_ref().map(|x| x.1)).collect();
    let defined: Vec<f64> = per_class_auc.iter().flatten().copied().collect();
    let macro_auc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(EvalReport {
        accuracy: correct as f64 / labels.len() as f64,
        confusion,
        per_class_roc: curves.into_iter().map(|c| c.map(|x| x.0)).collect(),
        per_class_auc,
        macro_auc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    Stream,
    Fusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedReport {
    pub name: String,
    pub kind: ReportKind,
    #[serde(flatten)]
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub num_classes: usize,
    pub num_samples: usize,
    pub reports: Vec<NamedReport>,
}

impl Evaluation {
    pub fn report(&self, name: &str) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.name == name).map(|r| &r.report)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Curve points as `report,class_id,fpr,tpr,threshold`, one row per vertex.
    pub fn roc_csv(&self) -> String {
        let mut out = String::from("report,class_id,fpr,tpr,threshold\n");
        for r in &self.reports {
            for (k, curve) in r.report.per_class_roc.iter().enumerate() {
                let Some(curve) = curve else { continue };
                for i in 0..curve.fpr.len() {
                    let _ = writeln!(
                        out,
                        "{},{k},{},{},{}",
                        r.name, curve.fpr[i], curve.tpr[i], curve.thresholds[i]
                    );
                }
            }
        }
        out
    }
}

/// Reports every named stream, then each fusion mode over all streams.
///
/// Streams must list their test samples in the same order as `labels`.
pub fn evaluate(streams: &[(String, Vec<ScoreVector>)], labels: &[usize], modes: &[FusionMode]) -> Result<Evaluation> {
    if streams.is_empty() {
        return Err(Error::invalid("no streams to evaluate"));
    }
    let mut names = BTreeSet::new();
    let mut reports = Vec::new();
    let mut c = 0;
    for (name, scores) in streams {
        if !names.insert(name.as_str()) {
            return Err(Error::invalid(format!("stream name {name:?} used twice")));
        }
        let nc = check_table(scores, labels)?;
        if c != 0 && nc != c {
            return Err(Error::Shape(format!("stream {name} has {nc} classes, expected {c}")));
        }
        c = nc;
        reports.push(NamedReport {
            name: name.clone(),
            kind: ReportKind::Stream,
            report: evaluate_scores(scores, labels)?,
        });
    }
    let modes: BTreeSet<FusionMode> = modes.iter().copied().collect();
    for mode in modes {
        let fused = (0..labels.len())
            .map(|i| {
                let row: Vec<ScoreVector> = streams.iter().map(|s| s.1[i].clone()).collect();
                fuse(&row, mode)
            })
            .collect::<Result<Vec<_>>>()?;
        reports.push(NamedReport {
            name: mode.name().to_string(),
            kind: ReportKind::Fusion,
            report: evaluate_scores(&fused, labels)?,
        });
    }
    Ok(Evaluation {
        num_classes: c,
        num_samples: labels.len(),
        reports,
    })
}

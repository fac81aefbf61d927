use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ROC vertices from the strictest threshold to the loosest. The first
/// vertex is `(0, 0)` at threshold `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
}

/// One vertex per distinct score, area by the trapezoid rule.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<(RocCurve, f64)> {
    if labels.len() != scores.len() {
        return Err(Error::Shape(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("roc needs at least one positive and one negative"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut curve = RocCurve {
        thresholds: vec![f64::INFINITY],
        tpr: vec![0.0],
        fpr: vec![0.0],
    };
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.thresholds.push(threshold);
        curve.tpr.push(tp as f64 / pos as f64);
        curve.fpr.push(fp as f64 / neg as f64);
    }

    let auc = curve
        .fpr
        .windows(2)
        .zip(curve.tpr.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[1] + y[0]) / 2.0)
        .sum();
    Ok((curve, auc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separated_inverted_tied() {
        let labels = [true, true, false, false];
        assert_eq!(roc_auc(&labels, &[0.9, 0.8, 0.2, 0.1]).unwrap().1, 1.0);
        assert_eq!(roc_auc(&labels, &[0.1, 0.2, 0.8, 0.9]).unwrap().1, 0.0);
        let (curve, auc) = roc_auc(&labels, &[0.5; 4]).unwrap();
        assert_eq!(auc, 0.5);
        assert_eq!(curve.fpr, vec![0.0, 1.0]);
        assert_eq!(curve.tpr, vec![0.0, 1.0]);
    }

    #[test]
    fn single_class_rejected() {
        assert!(roc_auc(&[true, true], &[0.1, 0.2]).is_err());
        assert!(roc_auc(&[true], &[0.1, 0.2]).is_err());
    }

    /// Mann-Whitney count of correctly ordered positive/negative pairs.
    fn pair_count_auc(labels: &[bool], scores: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..labels.len() {
            for j in 0..labels.len() {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    proptest! {
        #[test]
        fn trapezoid_equals_pair_count(
            data in prop::collection::vec((any::<bool>(), 0u8..6), 2..40)
        ) {
            let labels: Vec<bool> = data.iter().map(|d| d.0).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let scores: Vec<f64> = data.iter().map(|d| f64::from(d.1)).collect();
            let auc = roc_auc(&labels, &scores).unwrap().1;
            prop_assert!((auc - pair_count_auc(&labels, &scores)).abs() < 1e-12);
        }
    }
}

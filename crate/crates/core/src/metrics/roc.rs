use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};

/// ROC points `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one per distinct
/// score threshold taken in descending order.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Vec<(f64, f64)> {
    let p = positive.iter().filter(|&&b| b).count() as f64;
    let n = positive.len() as f64 - p;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut curve = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        curve.push((if n > 0.0 { fp / n } else { 0.0 }, if p > 0.0 { tp / p } else { 0.0 }));
    }
    curve
}

/// Trapezoidal area under the ROC curve; `None` unless both classes occur.
pub fn auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let p = positive.iter().filter(|&&b| b).count();
    if p == 0 || p == positive.len() {
        return None;
    }
    let curve = roc_curve(scores, positive);
    Some(
        curve
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    /// One-vs-rest AUC per class; `None` where the class is absent or is
    /// the only class present.
    pub per_class: Vec<Option<f64>>,
    /// Mean over the defined per-class values.
    pub macro_auc: Option<f64>,
}

/// One-vs-rest AUC of each column of an `N x K` probability table.
pub fn roc_auc_ovr(probs: &[Vec<f64>], labels: &[usize]) -> Result<RocReport> {
    if probs.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            what: "roc_auc_ovr",
            left: probs.len(),
            right: labels.len(),
        });
    }
    let k = probs.first().ok_or(MetricsError::Empty)?.len();
    for (i, row) in probs.iter().enumerate() {
        if row.len() != k {
            return Err(MetricsError::LengthMismatch {
                what: "roc_auc_ovr row",
                left: row.len(),
                right: k,
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite(i));
        }
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(MetricsError::LabelOutOfRange { label, classes: k });
    }
    let per_class: Vec<Option<f64>> = (0..k)
        .map(|c| {
            let scores: Vec<f64> = probs.iter().map(|r| r[c]).collect();
            let positive: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            auc(&scores, &positive)
        })
        .collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let macro_auc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(RocReport { per_class, macro_auc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_uninformative() {
        let pos = [true, true, false, false];
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &pos), Some(1.0));
        assert_eq!(auc(&[0.5; 4], &pos), Some(0.5));
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &pos), Some(0.0));
        assert_eq!(auc(&[0.1, 0.2], &[true, true]), None);
    }

    #[test]
    fn ovr_marks_absent_class() {
        let probs = vec![vec![0.8, 0.2, 0.0], vec![0.3, 0.7, 0.0]];
        let r = roc_auc_ovr(&probs, &[0, 1]).unwrap();
        assert_eq!(r.per_class, vec![Some(1.0), Some(1.0), None]);
        assert_eq!(r.macro_auc, Some(1.0));
        assert!(roc_auc_ovr(&probs, &[0, 3]).is_err());
    }
}

use serde::{Deserialize, Serialize};

use super::{render_table, MetricsError, Result};

/// Per-class precision, recall and F1 with macro means and the confusion
/// matrix (rows: true grade, columns: predicted grade).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<usize>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    /// Mean squared difference of predicted and true grades.
    pub mse: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Report over `classes` labels. Undefined ratios (a class never predicted,
/// or never present) count as 0 and still enter the macro mean.
pub fn classification_report_k(preds: &[usize], labels: &[usize], classes: usize) -> Result<ClassReport> {
    if preds.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            what: "classification_report",
            left: preds.len(),
            right: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&p, &l) in preds.iter().zip(labels) {
        for label in [p, l] {
            if label >= classes {
                return Err(MetricsError::LabelOutOfRange { label, classes });
            }
        }
        confusion[l][p] += 1;
    }
    let support: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
    let predicted: Vec<usize> = (0..classes).map(|c| confusion.iter().map(|r| r[c]).sum()).collect();
    let precision: Vec<f64> = (0..classes).map(|c| ratio(confusion[c][c], predicted[c])).collect();
    let recall: Vec<f64> = (0..classes).map(|c| ratio(confusion[c][c], support[c])).collect();
    let f1: Vec<f64> = precision
        .iter()
        .zip(&recall)
        .map(|(&p, &r)| if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 })
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / classes as f64;
    let hits: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let mse = preds
        .iter()
        .zip(labels)
        .map(|(&p, &l)| (p as f64 - l as f64).powi(2))
        .sum::<f64>()
        / preds.len() as f64;
    Ok(ClassReport {
        macro_precision: mean(&precision),
        macro_recall: mean(&recall),
        macro_f1: mean(&f1),
        accuracy: ratio(hits, preds.len()),
        precision,
        recall,
        f1,
        support,
        confusion,
        mse,
    })
}

/// Five-grade report.
pub fn classification_report(preds: &[usize], labels: &[usize]) -> Result<ClassReport> {
    classification_report_k(preds, labels, crate::nn::GRADES)
}

impl ClassReport {
    pub fn to_table(&self) -> String {
        let f = |v: f64| format!("{v:.2}");
        let mut rows: Vec<Vec<String>> = (0..self.precision.len())
            .map(|c| {
                vec![
                    c.to_string(),
                    f(self.precision[c]),
                    f(self.recall[c]),
                    f(self.f1[c]),
                    self.support[c].to_string(),
                ]
            })
            .collect();
        rows.push(vec![
            "Mean".into(),
            f(self.macro_precision),
            f(self.macro_recall),
            f(self.macro_f1),
            self.support.iter().sum::<usize>().to_string(),
        ]);
        let mut out = render_table(&["Grade", "Precision", "Recall", "F1 Score", "Support"], &rows);
        out.push_str(&format!("\nAccuracy {:.1}%  MSE {:.3}\n\nConfusion (rows true, columns predicted)\n", 100.0 * self.accuracy, self.mse));
        let header: Vec<String> = std::iter::once(String::new())
            .chain((0..self.confusion.len()).map(|c| c.to_string()))
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = self
            .confusion
            .iter()
            .enumerate()
            .map(|(c, r)| std::iter::once(c.to_string()).chain(r.iter().map(|v| v.to_string())).collect())
            .collect();
        out.push_str(&render_table(&header, &rows));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect() {
        let l = [0, 1, 2, 3, 4, 4];
        let r = classification_report(&l, &l).unwrap();
        assert_eq!((r.accuracy, r.macro_f1, r.mse), (1.0, 1.0, 0.0));
        assert_eq!(r.support, vec![1, 1, 1, 1, 2]);
    }

    #[test]
    fn constant_predictor() {
        let labels: Vec<usize> = (0..10).map(|i| i % 5).collect();
        let r = classification_report(&[0; 10], &labels).unwrap();
        assert_eq!(r.accuracy, 0.2);
        assert_eq!(r.recall, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(r.precision[1], 0.0);
        assert!(r.to_table().contains("Mean"));
    }

    #[test]
    fn errors() {
        assert!(classification_report(&[5], &[0]).is_err());
        assert!(classification_report(&[0, 1], &[0]).is_err());
        assert!(classification_report(&[], &[]).is_err());
    }
}

//! Evaluation statistics: box overlap, detection summaries, per-grade
//! classification reports, one-vs-rest ROC AUC and a finite-difference
//! gradient checker.

mod classification;
mod detection;
mod gradcheck;
mod roc;

pub use classification::{classification_report, classification_report_k, ClassReport};
pub use detection::{detection_report, jaccard, DetectionReport, JI_THRESHOLDS};
pub use gradcheck::{grad_check, grad_check_with, numeric_gradient, numeric_gradient_with, GradCheck, Stencil};
pub use roc::{auc, roc_auc_ovr, roc_curve, RocReport};

use crate::geom::BBox;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("box {0} has zero area")]
    DegenerateBox(BBox),
    #[error("no ground truth to evaluate against")]
    EmptyGroundTruth,
    #[error("empty input")]
    Empty,
    #[error("{what}: lengths differ ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("label {label} outside 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Render rows as a right-aligned plain-text table.
pub(crate) fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| -> String {
        cells
            .zip(&widths)
            .map(|(c, &w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(&mut header.iter().copied());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
        out.push('\n');
    }
    out
}

//! The evaluation metrics on hand-made predictions: per-grade report with
//! confusion matrix, one-vs-rest ROC AUC, and a Jaccard detection summary.

use std::collections::BTreeMap;

use kneeoa::geom::{BBox, Side};
use kneeoa::metrics::{classification_report, detection_report, jaccard, roc_auc_ovr};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let labels = [0, 0, 1, 1, 2, 2, 3, 3, 4, 4];
    let preds = [0, 1, 1, 1, 2, 3, 3, 3, 4, 3];
    let report = classification_report(&preds, &labels)?;
    println!("{}", report.to_table());

    let probs: Vec<Vec<f64>> = preds
        .iter()
        .map(|&p| (0..5).map(|g| if g == p { 0.6 } else { 0.1 }).collect())
        .collect();
    let roc = roc_auc_ovr(&probs, &labels)?;
    println!("per-grade AUC {:?}, macro {:?}\n", roc.per_class, roc.macro_auc);

    let truth = BBox::new(40, 30, 80, 50);
    let mut gts = BTreeMap::new();
    let mut dets = BTreeMap::new();
    for (i, shift) in [0, 8, 20, 45].into_iter().enumerate() {
        let key = (format!("img{i}"), Side::Right);
        let det = BBox::new(40 + shift, 30, 80, 50);
        println!("shift {shift:>2} px -> JI {:.3}", jaccard(&det, &truth)?);
        gts.insert(key.clone(), truth);
        dets.insert(key, det);
    }
    println!("\n{}", detection_report(&dets, &gts)?.to_table("shifted"));
    Ok(())
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{render_table, MetricsError, Result};
use crate::geom::{BBox, Side};

/// Jaccard thresholds of the detection summary: `> 0`, then `>= t`.
pub const JI_THRESHOLDS: [f64; 4] = [0.0, 0.25, 0.5, 0.75];

/// Intersection over union of two boxes on the pixel grid.
pub fn jaccard(a: &BBox, b: &BBox) -> Result<f64> {
    for bx in [a, b] {
        if bx.is_empty() {
            return Err(MetricsError::DegenerateBox(*bx));
        }
    }
    let inter = a.intersection(b).map_or(0, |i| i.area());
    Ok(inter as f64 / (a.area() + b.area() - inter) as f64)
}

/// Share of annotated knees detected at each overlap level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub total: usize,
    pub missing: usize,
    /// Knees at `JI > 0`, `JI >= 0.25`, `JI >= 0.5`, `JI >= 0.75`.
    pub counts: [usize; 4],
    pub fractions: [f64; 4],
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub scores: Vec<f64>,
}

fn passes(ji: f64, level: usize) -> bool {
    if level == 0 {
        ji > 0.0
    } else {
        ji >= JI_THRESHOLDS[level]
    }
}

/// Score detections against ground truth keyed by `(image, side)`.
///
/// Each ground-truth knee contributes one JI; a knee without a detection
/// scores 0. Detections without ground truth are ignored.
pub fn detection_report(
    dets: &BTreeMap<(String, Side), BBox>,
    gts: &BTreeMap<(String, Side), BBox>,
) -> Result<DetectionReport> {
    if gts.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let mut scores = Vec::with_capacity(gts.len());
    let mut missing = 0;
    for (key, gt) in gts {
        match dets.get(key) {
            Some(d) if !d.is_empty() => scores.push(jaccard(d, gt)?),
            _ => {
                if gt.is_empty() {
                    return Err(MetricsError::DegenerateBox(*gt));
                }
                missing += 1;
                scores.push(0.0);
            }
        }
    }
    let n = scores.len() as f64;
    let mut counts = [0usize; 4];
    for &s in &scores {
        for (level, c) in counts.iter_mut().enumerate() {
            *c += passes(s, level) as usize;
        }
    }
    let mean = scores.iter().sum::<f64>() / n;
    let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DetectionReport {
        total: scores.len(),
        missing,
        counts,
        fractions: counts.map(|c| c as f64 / n),
        mean,
        std,
        scores,
    })
}

impl DetectionReport {
    pub fn fraction_at(&self, threshold: f64) -> Option<f64> {
        JI_THRESHOLDS
            .iter()
            .position(|&t| t == threshold)
            .map(|i| self.fractions[i])
    }

    pub fn to_table(&self, label: &str) -> String {
        let pct = |f: f64| format!("{:.1}%", 100.0 * f);
        render_table(
            &["Method", "JI > 0", "JI >= 0.25", "JI >= 0.5", "JI >= 0.75", "Mean", "Std. Dev."],
            &[vec![
                label.to_string(),
                pct(self.fractions[0]),
                pct(self.fractions[1]),
                pct(self.fractions[2]),
                pct(self.fractions[3]),
                format!("{:.3}", self.mean),
                format!("{:.3}", self.std),
            ]],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keyed(boxes: &[BBox]) -> BTreeMap<(String, Side), BBox> {
        boxes
            .iter()
            .enumerate()
            .map(|(i, b)| ((format!("img{i}"), Side::Left), *b))
            .collect()
    }

    #[test]
    fn jaccard_basics() {
        let a = BBox::new(0, 0, 20, 20);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &BBox::new(30, 30, 5, 5)).unwrap(), 0.0);
        assert_eq!(jaccard(&a, &BBox::new(10, 0, 20, 20)).unwrap(), 1.0 / 3.0);
        assert!(jaccard(&a, &BBox::new(0, 0, 0, 4)).is_err());
    }

    #[test]
    fn perfect_and_third() {
        let gts = keyed(&[BBox::new(0, 0, 20, 20), BBox::new(5, 5, 10, 10)]);
        let r = detection_report(&gts, &gts).unwrap();
        assert_eq!((r.fractions, r.mean, r.std), ([1.0; 4], 1.0, 0.0));

        let g = keyed(&[BBox::new(0, 0, 20, 20)]);
        let d = keyed(&[BBox::new(10, 0, 20, 20)]);
        assert_eq!(detection_report(&d, &g).unwrap().fractions, [1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_counts_zero() {
        let g = keyed(&[BBox::new(0, 0, 20, 20), BBox::new(0, 0, 4, 4)]);
        let d = keyed(&[BBox::new(0, 0, 20, 20)]);
        let r = detection_report(&d, &g).unwrap();
        assert_eq!((r.missing, r.mean), (1, 0.5));
        assert!(detection_report(&d, &BTreeMap::new()).is_err());
        assert!(r.to_table("x").contains("50.0%"));
    }
}
